#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ringtex/errors.hpp"
#include "ringtex/time_series.hpp"

namespace ringtex {

struct PressPhases {
    double t0;      // [s] trace start
    double t_peak;  // [s] peak force: press -> static contact
    double t_lift;  // [s] force drop below (1 - delta_lift) * peak
    double t_end;   // [s] trace end
};

struct SlopePair {
    double press_slope;  // [N/s], > 0
    double lift_slope;   // [N/s], < 0
};

struct ProfileSegment {
    double duration;  // [s]
    double speed;     // [mm/s], signed
};

// Trapezoid: rise at constant speed, plateau, fall back to zero.
struct PressureProfile {
    std::array<ProfileSegment, 3> segments;
    double target_displacement;  // [mm]
    double hold_duration;        // [s]

    double total_duration() const {
        return segments[0].duration + segments[1].duration + segments[2].duration;
    }
};

struct SoftnessConfig {
    double slope_min = 0.0;               // [N/s] 0,0 = derive from texture set
    double slope_max = 0.0;               // [N/s]
    double speed_min = 2.0;               // [mm/s]
    double speed_max = 20.0;              // [mm/s]
    double target_displacement = 8.0;     // [mm]
    double hold_duration = 30.0;          // [s]
    double smoothing_window_s = 0.1;      // [s] pre-smoothing for peak finding
    double delta_lift = 0.05;             // fraction of peak marking lift-off
    double profile_rate_hz = 100.0;       // [Hz] CSV export rate
};

namespace detail {

// Centered moving average with edge clamping; window in samples is odd.
inline std::vector<double> moving_average(const std::vector<double>& v, std::size_t half_w) {
    const std::size_t n = v.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= half_w ? i - half_w : 0;
        const std::size_t hi = std::min(n - 1, i + half_w);
        double sum = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) sum += v[j];
        out[i] = sum / static_cast<double>(hi - lo + 1);
    }
    return out;
}

}  // namespace detail

// Peak of the smoothed trace marks press -> hold; first drop below
// (1 - delta_lift) * peak marks lift-off. The argmax is refined on the raw
// trace within one window so smoothing cannot shift the reported peak time.
inline PressPhases segment_phases(const TimeSeries& force, double smoothing_window_s = 0.1,
                                  double delta_lift = 0.05) {
    const auto& v = force.values();
    const auto& t = force.timestamps();
    const std::size_t n = v.size();
    auto half_w = static_cast<std::size_t>(std::llround(0.5 * smoothing_window_s / force.dt()));
    const auto smoothed = detail::moving_average(v, half_w);

    std::size_t i_s = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (smoothed[i] > smoothed[i_s]) i_s = i;
    }
    const std::size_t lo = i_s >= 2 * half_w ? i_s - 2 * half_w : 0;
    const std::size_t hi = std::min(n - 1, i_s + 2 * half_w);
    std::size_t i_peak = lo;
    for (std::size_t i = lo + 1; i <= hi; ++i) {
        if (v[i] > v[i_peak]) i_peak = i;
    }
    if (i_peak == 0 || i_peak == n - 1) {
        throw NoInteriorPeakError("force trace has no interior peak");
    }
    const double peak = v[i_peak];
    const double lift_level = (1.0 - delta_lift) * peak;
    std::size_t i_lift = 0;
    for (std::size_t i = i_peak + 1; i < n; ++i) {
        if (v[i] < lift_level) {
            i_lift = i;
            break;
        }
    }
    if (i_lift == 0) {
        throw NoLiftOffError("force never drops below " + format_double(lift_level) +
                             " N after its peak");
    }
    if (i_lift == n - 1) {
        throw DegenerateIntervalError("lift-off detected only at the final sample");
    }
    return PressPhases{t.front(), t[i_peak], t[i_lift], t.back()};
}

namespace detail {

// Ordinary least-squares slope of value over time on [i_lo, i_hi].
inline double ls_slope(const TimeSeries& s, std::size_t i_lo, std::size_t i_hi) {
    if (i_hi - i_lo + 1 < 2) {
        throw DegenerateIntervalError("slope interval has fewer than 2 samples");
    }
    const auto& t = s.timestamps();
    const auto& v = s.values();
    const auto n = static_cast<double>(i_hi - i_lo + 1);
    double mt = 0.0, mv = 0.0;
    for (std::size_t i = i_lo; i <= i_hi; ++i) {
        mt += t[i];
        mv += v[i];
    }
    mt /= n;
    mv /= n;
    double num = 0.0, den = 0.0;
    for (std::size_t i = i_lo; i <= i_hi; ++i) {
        num += (t[i] - mt) * (v[i] - mv);
        den += (t[i] - mt) * (t[i] - mt);
    }
    return num / den;
}

}  // namespace detail

inline SlopePair compute_slopes(const TimeSeries& force, const PressPhases& phases) {
    const double press = detail::ls_slope(force, force.index_at(phases.t0),
                                          force.index_at(phases.t_peak));
    const double lift = detail::ls_slope(force, force.index_at(phases.t_lift),
                                         force.index_at(phases.t_end));
    if (!(press > 0.0)) {
        throw DegenerateIntervalError("press slope is not positive");
    }
    if (!(lift < 0.0)) {
        throw DegenerateIntervalError("lift slope is not negative");
    }
    return SlopePair{press, lift};
}

// Affine slope -> actuator speed map; slope clamped into the slope range.
inline double map_slope_to_speed(double slope, double s_min, double s_max, double v_min,
                                 double v_max) {
    if (!(s_min < s_max) || !(v_min < v_max)) {
        throw ConfigError("slope/speed ranges must be nonempty");
    }
    const double s = std::clamp(slope, s_min, s_max);
    return v_min + (s - s_min) * (v_max - v_min) / (s_max - s_min);
}

inline PressureProfile build_profile(const SlopePair& slopes, const SoftnessConfig& cfg) {
    const double rise = map_slope_to_speed(slopes.press_slope, cfg.slope_min, cfg.slope_max,
                                           cfg.speed_min, cfg.speed_max);
    const double fall = map_slope_to_speed(-slopes.lift_slope, cfg.slope_min, cfg.slope_max,
                                           cfg.speed_min, cfg.speed_max);
    return PressureProfile{
        {ProfileSegment{cfg.target_displacement / rise, rise},
         ProfileSegment{cfg.hold_duration, 0.0},
         ProfileSegment{cfg.target_displacement / fall, -fall}},
        cfg.target_displacement,
        cfg.hold_duration,
    };
}

// Position/speed of the trapezoid at time t from profile start.
inline std::pair<double, double> profile_at(const PressureProfile& p, double t) {
    if (t < 0.0) return {0.0, 0.0};
    double x = 0.0;
    for (const auto& seg : p.segments) {
        if (t < seg.duration) {
            return {x + seg.speed * t, seg.speed};
        }
        x += seg.speed * seg.duration;
        t -= seg.duration;
    }
    return {x, 0.0};
}

inline void save_profile_csv(const std::filesystem::path& path, const PressureProfile& p,
                             double rate_hz) {
    std::string out = "time_s,displacement_mm,speed_mm_s\n";
    const double total = p.total_duration();
    const auto k_max = static_cast<long long>(std::floor(total * rate_hz + 1e-9));
    for (long long k = 0; k <= k_max; ++k) {
        const double t = static_cast<double>(k) / rate_hz;
        const auto [x, v] = profile_at(p, t);
        out += format_double(t);
        out += ',';
        out += format_double(x);
        out += ',';
        out += format_double(v);
        out += '\n';
    }
    write_file_atomic(path, out);
}

}  // namespace ringtex
