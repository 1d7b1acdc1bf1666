#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "ringtex/csv.hpp"
#include "ringtex/errors.hpp"

namespace ringtex {

enum class Unit {
    Newton,        // contact force
    Celsius,       // skin temperature
    WattPerM2,     // heat flux
};

inline const char* unit_column(Unit u) {
    switch (u) {
        case Unit::Newton: return "force_n";
        case Unit::Celsius: return "temp_c";
        case Unit::WattPerM2: return "flux_w_m2";
    }
    return "";
}

inline Unit unit_from_column(std::string_view column, const std::string& context) {
    if (column == "force_n") return Unit::Newton;
    if (column == "temp_c") return Unit::Celsius;
    if (column == "flux_w_m2") return Unit::WattPerM2;
    throw UnitMismatchError("unknown value column '" + std::string(column) + "' in " + context);
}

// Uniformly sampled scalar trace. Validated on construction: at least two
// samples, strictly increasing timestamps, constant step (1e-6 relative).
class TimeSeries {
public:
    TimeSeries(std::vector<double> timestamps, std::vector<double> values, Unit unit)
        : timestamps_(std::move(timestamps)), values_(std::move(values)), unit_(unit) {
        if (timestamps_.size() != values_.size()) {
            throw CsvFormatError("timestamp/value length mismatch");
        }
        if (timestamps_.size() < 2) {
            throw CsvFormatError("series needs at least two samples");
        }
        const double dt = timestamps_[1] - timestamps_[0];
        if (!(dt > 0.0)) {
            throw NonMonotonicTimestampsError("timestamps not strictly increasing at index 1");
        }
        for (std::size_t i = 1; i < timestamps_.size(); ++i) {
            const double step = timestamps_[i] - timestamps_[i - 1];
            if (!(step > 0.0)) {
                throw NonMonotonicTimestampsError("timestamps not strictly increasing at index " +
                                                  std::to_string(i));
            }
            if (std::abs(step - dt) > 1e-6 * dt) {
                throw NonUniformStepError("sample step deviates at index " + std::to_string(i));
            }
        }
        dt_ = dt;
    }

    const std::vector<double>& timestamps() const { return timestamps_; }
    const std::vector<double>& values() const { return values_; }
    Unit unit() const { return unit_; }
    double dt() const { return dt_; }
    double rate_hz() const { return 1.0 / dt_; }
    std::size_t size() const { return values_.size(); }
    double t_start() const { return timestamps_.front(); }
    double t_end() const { return timestamps_.back(); }

    // Nearest sample index for a time inside the span.
    std::size_t index_at(double t) const {
        double x = (t - timestamps_.front()) / dt_;
        if (x < 0.0) x = 0.0;
        auto i = static_cast<std::size_t>(std::llround(x));
        if (i >= values_.size()) i = values_.size() - 1;
        return i;
    }

private:
    std::vector<double> timestamps_;
    std::vector<double> values_;
    Unit unit_;
    double dt_ = 0.0;
};

// CSV form: header `time_s,<unit column>` then one row per sample.
inline TimeSeries load_series_csv(const std::filesystem::path& path, Unit expected_unit) {
    const std::string content = read_file(path);
    const auto lines = split_lines(content);
    const std::string context = path.string();
    if (lines.empty()) {
        throw CsvFormatError("empty file: " + context);
    }
    const auto header = split_fields(lines[0]);
    if (header.size() != 2 || header[0] != "time_s") {
        throw CsvFormatError("expected header 'time_s,<value>' in " + context);
    }
    const Unit unit = unit_from_column(header[1], context);
    if (unit != expected_unit) {
        throw UnitMismatchError("expected column '" + std::string(unit_column(expected_unit)) +
                                "', found '" + std::string(header[1]) + "' in " + context);
    }
    std::vector<double> ts;
    std::vector<double> vs;
    ts.reserve(lines.size() - 1);
    vs.reserve(lines.size() - 1);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) {
            throw CsvFormatError("blank line " + std::to_string(i + 1) + " in " + context);
        }
        const auto fields = split_fields(lines[i]);
        if (fields.size() != 2) {
            throw CsvFormatError("expected 2 fields on line " + std::to_string(i + 1) + " in " +
                                 context);
        }
        ts.push_back(parse_double(fields[0], context));
        vs.push_back(parse_double(fields[1], context));
    }
    return TimeSeries(std::move(ts), std::move(vs), unit);
}

inline void save_series_csv(const std::filesystem::path& path, const TimeSeries& series) {
    std::string out = "time_s,";
    out += unit_column(series.unit());
    out += '\n';
    for (std::size_t i = 0; i < series.size(); ++i) {
        out += format_double(series.timestamps()[i]);
        out += ',';
        out += format_double(series.values()[i]);
        out += '\n';
    }
    write_file_atomic(path, out);
}

// First time the flux magnitude stays above threshold_w_m2 for at least
// hold_s. Flux leads the temperature response, so it marks contact.
inline double detect_contact_onset(const TimeSeries& flux, double threshold_w_m2,
                                   double hold_s) {
    const auto& v = flux.values();
    const auto& t = flux.timestamps();
    // A run of n samples spans (n-1)*dt, so holding for hold_s needs one
    // sample more than the ratio.
    auto hold_n = static_cast<std::size_t>(std::ceil(hold_s / flux.dt() - 1e-9)) + 1;
    if (hold_n < 1) hold_n = 1;
    std::size_t run = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) > threshold_w_m2) {
            ++run;
            if (run >= hold_n) {
                return t[i - (run - 1)];
            }
        } else {
            run = 0;
        }
    }
    throw NoOnsetError("no sustained flux above " + format_double(threshold_w_m2) + " W/m2");
}

}  // namespace ringtex
