#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "ringtex/errors.hpp"
#include "ringtex/recording.hpp"
#include "ringtex/time_series.hpp"

namespace ringtex {

struct ThermalConfig {
    double r_skin_display = 0.0015;     // [m2 K/W]
    double skin_cutoff_hz = 10.0;       // [Hz]
    double flux_cutoff_hz = 1.0;        // [Hz]
    double onset_threshold_w_m2 = 50.0; // [W/m2]
    double onset_hold_s = 0.2;          // [s]
    double clamp_min_c = 5.0;           // [degC] cold-tank floor
    double clamp_max_c = 42.5;          // [degC] hot-tank ceiling
};

// Contact resistance between skin and a material of conductivity k at the
// database's ~2 N interaction force.
inline double contact_resistance(double k_object) {
    if (!(k_object > 0.0)) {
        throw ConfigError("thermal conductivity must be positive");
    }
    return (0.37 + k_object) / (1870.0 * k_object);
}

namespace detail {

struct Biquad {
    double b0, b1, b2;  // numerator
    double a1, a2;      // denominator (a0 = 1)
};

// Second-order critically-flat (Butterworth) low-pass via the bilinear
// transform, numerator rescaled for unity DC gain.
inline Biquad design_lowpass(double cutoff_hz, double rate_hz) {
    const double c = std::tan(std::numbers::pi * cutoff_hz / rate_hz);
    const double a0 = 1.0 + std::numbers::sqrt2 * c + c * c;
    Biquad q{};
    q.a1 = 2.0 * (c * c - 1.0) / a0;
    q.a2 = (1.0 - std::numbers::sqrt2 * c + c * c) / a0;
    const double raw = c * c / a0;
    const double gain = (1.0 + q.a1 + q.a2) / (4.0 * raw);
    q.b0 = raw * gain;
    q.b2 = raw * gain;
    q.b1 = 2.0 * raw * gain;
    return q;
}

// One causal pass, state primed to the boundary value so a constant input
// passes through unchanged from the first sample.
inline std::vector<double> biquad_pass(const Biquad& q, const std::vector<double>& x) {
    std::vector<double> y(x.size());
    double x1 = x[0], x2 = x[0], y1 = x[0], y2 = x[0];
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double yi =
            q.b0 * x[i] + q.b1 * x1 + q.b2 * x2 - q.a1 * y1 - q.a2 * y2;
        x2 = x1;
        x1 = x[i];
        y2 = y1;
        y1 = yi;
        y[i] = yi;
    }
    return y;
}

}  // namespace detail

// Zero-phase low-pass: one forward and one backward pass of the biquad.
inline TimeSeries lowpass(const TimeSeries& series, double cutoff_hz) {
    const double rate = series.rate_hz();
    if (!(cutoff_hz > 0.0) || cutoff_hz >= 0.5 * rate) {
        throw NyquistError("cutoff " + format_double(cutoff_hz) + " Hz not below Nyquist of " +
                           format_double(0.5 * rate) + " Hz");
    }
    const auto q = detail::design_lowpass(cutoff_hz, rate);
    auto y = detail::biquad_pass(q, series.values());
    std::reverse(y.begin(), y.end());
    y = detail::biquad_pass(q, y);
    std::reverse(y.begin(), y.end());
    return TimeSeries(series.timestamps(), std::move(y), series.unit());
}

struct ThermalInputs {
    TimeSeries skin_temp;      // [degC], filtered, trimmed to onset
    TimeSeries heat_flux;      // [W/m2], filtered, trimmed to onset
    double onset;              // [s]
    double r_skin_display;     // [m2 K/W]
};

struct DisplayResult {
    TimeSeries display_temp;   // [degC]
    std::size_t clamped_samples = 0;
};

// T_display(t) = T_skin(t) - q''(t) * R, clamped into the plant's
// reachable band with a count of clamped samples.
inline DisplayResult display_temperature(const ThermalInputs& in, double clamp_min_c = 5.0,
                                         double clamp_max_c = 42.5) {
    if (!(in.r_skin_display > 0.0)) {
        throw ConfigError("r_skin_display must be positive");
    }
    const auto& ts = in.skin_temp.timestamps();
    const auto& tq = in.heat_flux.timestamps();
    if (ts.size() != tq.size()) {
        throw MisalignedSeriesError("skin and flux sample counts differ");
    }
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (std::abs(ts[i] - tq[i]) > 1e-9) {
            throw MisalignedSeriesError("skin/flux time bases diverge at index " +
                                        std::to_string(i));
        }
    }
    std::vector<double> out(ts.size());
    std::size_t clamped = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        double v = in.skin_temp.values()[i] - in.heat_flux.values()[i] * in.r_skin_display;
        if (v < clamp_min_c || v > clamp_max_c) {
            v = std::clamp(v, clamp_min_c, clamp_max_c);
            ++clamped;
        }
        out[i] = v;
    }
    return DisplayResult{TimeSeries(ts, std::move(out), Unit::Celsius), clamped};
}

struct PolyFit {
    std::array<double, 8> coeffs;  // ascending powers of tau in [0, 1]
    double rmse;                   // [same unit as input]
};

inline double eval_poly(const std::array<double, 8>& c, double tau) {
    double y = c[7];
    for (int i = 6; i >= 0; --i) y = y * tau + c[i];
    return y;
}

// Degree-7 least squares on normalized time via Householder QR. Raw seconds
// over a 30 s span would make the Vandermonde hopeless at this degree, so
// tau in [0, 1] is not optional.
inline PolyFit fit_poly7(const TimeSeries& series) {
    const std::size_t n = series.size();
    constexpr std::size_t m = 8;
    if (n < 9) {
        throw RankDeficientError("need at least 9 samples for a degree-7 fit");
    }
    const double t0 = series.t_start();
    const double span = series.t_end() - t0;
    std::vector<double> a(n * m);  // column-major design matrix
    for (std::size_t i = 0; i < n; ++i) {
        const double tau = (series.timestamps()[i] - t0) / span;
        double p = 1.0;
        for (std::size_t j = 0; j < m; ++j) {
            a[j * n + i] = p;
            p *= tau;
        }
    }
    std::vector<double> y = series.values();

    // Householder QR, applying reflectors to y as they are formed.
    for (std::size_t k = 0; k < m; ++k) {
        double norm = 0.0;
        for (std::size_t i = k; i < n; ++i) norm += a[k * n + i] * a[k * n + i];
        norm = std::sqrt(norm);
        if (norm < 1e-12) {
            throw RankDeficientError("design matrix is rank deficient at column " +
                                     std::to_string(k));
        }
        const double akk = a[k * n + k];
        const double alpha = akk >= 0.0 ? -norm : norm;
        std::vector<double> vk(n - k);
        vk[0] = akk - alpha;
        for (std::size_t i = k + 1; i < n; ++i) vk[i - k] = a[k * n + i];
        double vnorm2 = 0.0;
        for (double v : vk) vnorm2 += v * v;
        if (vnorm2 > 0.0) {
            for (std::size_t j = k; j < m; ++j) {
                double dot = 0.0;
                for (std::size_t i = k; i < n; ++i) dot += vk[i - k] * a[j * n + i];
                const double f = 2.0 * dot / vnorm2;
                for (std::size_t i = k; i < n; ++i) a[j * n + i] -= f * vk[i - k];
            }
            double dot = 0.0;
            for (std::size_t i = k; i < n; ++i) dot += vk[i - k] * y[i];
            const double f = 2.0 * dot / vnorm2;
            for (std::size_t i = k; i < n; ++i) y[i] -= f * vk[i - k];
        }
    }
    PolyFit fit{};
    for (std::size_t k = m; k-- > 0;) {
        double s = y[k];
        for (std::size_t j = k + 1; j < m; ++j) s -= a[j * n + k] * fit.coeffs[j];
        const double diag = a[k * n + k];
        if (std::abs(diag) < 1e-12) {
            throw RankDeficientError("zero pivot in triangular solve");
        }
        fit.coeffs[k] = s / diag;
    }
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double tau = (series.timestamps()[i] - t0) / span;
        const double r = eval_poly(fit.coeffs, tau) - series.values()[i];
        ss += r * r;
    }
    fit.rmse = std::sqrt(ss / static_cast<double>(n));
    return fit;
}

struct ThermalCommand {
    TimeSeries display_temp;       // [degC] sampled trajectory
    std::array<double, 8> poly_coeffs;
    double fit_rmse;               // [degC]
    double t_start;                // [s] tau = 0
    double t_end;                  // [s] tau = 1
    std::size_t clamped_samples = 0;
    std::vector<std::string> warnings;

    // Command value at absolute time t, held constant outside [t_start, t_end].
    double at(double t) const {
        const double tau = std::clamp((t - t_start) / (t_end - t_start), 0.0, 1.0);
        return eval_poly(poly_coeffs, tau);
    }
};

namespace detail {

inline TimeSeries trim_from(const TimeSeries& s, double t_from) {
    const auto& t = s.timestamps();
    std::size_t i0 = 0;
    while (i0 < t.size() && t[i0] < t_from - 1e-12) ++i0;
    if (t.size() - i0 < 2) {
        throw DegenerateIntervalError("fewer than 2 samples at or after onset");
    }
    return TimeSeries(std::vector<double>(t.begin() + static_cast<std::ptrdiff_t>(i0), t.end()),
                      std::vector<double>(s.values().begin() + static_cast<std::ptrdiff_t>(i0),
                                          s.values().end()),
                      s.unit());
}

}  // namespace detail

// Full thermal pipeline: filter both traces, trim to contact, apply the
// display-temperature law, compress to the polynomial payload.
inline ThermalCommand render_thermal(const TextureRecording& rec, const ThermalConfig& cfg) {
    const TimeSeries skin_f = lowpass(rec.skin_temp, cfg.skin_cutoff_hz);
    const TimeSeries flux_f = lowpass(rec.heat_flux, cfg.flux_cutoff_hz);
    const double onset = detect_contact_onset(flux_f, cfg.onset_threshold_w_m2, cfg.onset_hold_s);
    ThermalInputs in{detail::trim_from(skin_f, onset), detail::trim_from(flux_f, onset), onset,
                     cfg.r_skin_display};
    auto disp = display_temperature(in, cfg.clamp_min_c, cfg.clamp_max_c);
    auto fit = fit_poly7(disp.display_temp);
    ThermalCommand cmd{std::move(disp.display_temp), fit.coeffs,           fit.rmse,
                       0.0,                          0.0,                  disp.clamped_samples,
                       {}};
    cmd.t_start = cmd.display_temp.t_start();
    cmd.t_end = cmd.display_temp.t_end();
    if (cmd.fit_rmse > 0.5) {
        cmd.warnings.push_back("polynomial fit rmse " + format_double(cmd.fit_rmse) +
                               " degC exceeds 0.5 degC");
    }
    if (cmd.clamped_samples > 0) {
        cmd.warnings.push_back(std::to_string(cmd.clamped_samples) +
                               " display samples clamped to the reachable band");
    }
    return cmd;
}

inline void save_thermal_csv(const std::filesystem::path& path, const ThermalCommand& cmd) {
    std::string out = "time_s,display_temp_c\n";
    for (std::size_t i = 0; i < cmd.display_temp.size(); ++i) {
        out += format_double(cmd.display_temp.timestamps()[i]);
        out += ',';
        out += format_double(cmd.display_temp.values()[i]);
        out += '\n';
    }
    write_file_atomic(path, out);
}

inline void save_thermal_poly_json(const std::filesystem::path& path, const ThermalCommand& cmd) {
    nlohmann::json j;
    j["poly_coeffs"] = cmd.poly_coeffs;
    j["t_start_s"] = cmd.t_start;
    j["t_end_s"] = cmd.t_end;
    j["fit_rmse_c"] = cmd.fit_rmse;
    j["clamped_samples"] = cmd.clamped_samples;
    j["warnings"] = cmd.warnings;
    write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace ringtex
