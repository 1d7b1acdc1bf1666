#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "ringtex/errors.hpp"
#include "ringtex/recording.hpp"
#include "ringtex/rng.hpp"
#include "ringtex/surface_image.hpp"
#include "ringtex/time_series.hpp"

namespace ringtex {

// Canonical texture set. Order is fixed: it is the row/column order of every
// confusion matrix and the iteration order of batch rendering.
inline const std::vector<std::string>& texture_kinds() {
    static const std::vector<std::string> kinds = {
        "rough_metal", "smooth_metal", "rough_foam", "smooth_foam", "cardboard", "fabric",
    };
    return kinds;
}

namespace detail {

struct FixtureParams {
    // Pressing: force ramps at press_slope to exactly 3 N, sags slightly
    // over the 30 s hold, then ramps back to zero over lift_duration.
    double press_slope;    // [N/s]
    double lift_duration;  // [s]
    // Thermal: flux steps to q_step at contact (the sensor sees the touch
    // immediately), the bulk then builds with tau_r and relaxes toward q_ss
    // with tau_q; skin temperature drops by delta_t with tau_t. Metals pull
    // more heat than foams, and every trace slews slowly enough that a
    // display with a ~3 s tube lag can follow the rendered command.
    double q_step;         // [W/m2]
    double q0;             // [W/m2]
    double q_ss;           // [W/m2]
    double tau_r;          // [s]
    double tau_q;          // [s]
    double delta_t;        // [degC]
    double tau_t;          // [s]
    double conductivity;   // [W/(m K)]
    // Image: sinusoidal grating (period_px > 0), uniform level
    // (period_px == 0), or uniform noise field (period_px < 0).
    int period_px;
    int base_level;
};

// FNV-1a; std::hash would be implementation-defined and break fixture
// determinism across toolchains.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t x = 1469598103934665603ull;
    for (unsigned char c : s) {
        x ^= c;
        x *= 1099511628211ull;
    }
    return x;
}

inline FixtureParams fixture_params(const std::string& kind) {
    // Press slopes are chosen so 3/slope lands on the 10 ms sample grid and
    // the stiffness ordering is metal > cardboard > fabric > foam.
    if (kind == "smooth_metal") return {2.0, 1.16, 120, 850, 420, 9.0, 12.0, 2.4, 20.0, 50.0, 0, 150};
    if (kind == "rough_metal") return {1.5, 1.55, 120, 780, 380, 9.0, 11.0, 2.2, 18.0, 50.0, 40, 128};
    if (kind == "cardboard") return {1.0, 2.32, 120, 420, 200, 5.0, 10.0, 1.6, 12.0, 0.18, -1, 128};
    if (kind == "fabric") return {0.75, 3.09, 120, 240, 120, 3.0, 10.0, 1.0, 12.0, 0.06, 3, 128};
    if (kind == "rough_foam") return {0.4, 5.8, 120, 130, 80, 2.5, 10.0, 0.7, 15.0, 0.05, 100, 128};
    if (kind == "smooth_foam") return {0.2, 11.6, 120, 120, 70, 2.5, 12.0, 0.6, 15.0, 0.04, 0, 180};
    throw ConfigError("unknown texture kind '" + kind + "'");
}

}  // namespace detail

// Synthetic stand-in for one recorded surface. Deterministic per
// (kind, seed): traces are closed-form, only the noise-field image draws
// from the generator. Trace rate 100 Hz; contact at t = 1.5 s on the
// thermal channels; the force trace starts at press onset.
inline TextureRecording generate_fixture(const std::string& kind, std::uint64_t seed) {
    const auto p = detail::fixture_params(kind);
    const double dt = 0.01;           // [s]
    const double contact_t = 1.5;     // [s] thermal contact
    const double hold_s = 30.0;       // [s] static press
    const double sag_n = 0.1;         // [N] force relaxation over the hold

    // --- force trace: ramp / sagging plateau / ramp down -----------------
    const auto n_press = static_cast<std::size_t>(std::llround(3.0 / p.press_slope / dt));
    const auto n_hold = static_cast<std::size_t>(std::llround(hold_s / dt));
    const auto n_lift = static_cast<std::size_t>(std::llround(p.lift_duration / dt));
    const std::size_t n_force = n_press + n_hold + n_lift + 1;
    std::vector<double> ft(n_force), fv(n_force);
    const double lift_rate = (3.0 - sag_n) / p.lift_duration;  // [N/s]
    for (std::size_t i = 0; i < n_force; ++i) {
        const double t = static_cast<double>(i) * dt;
        ft[i] = t;
        if (i <= n_press) {
            fv[i] = std::min(p.press_slope * t, 3.0);
        } else if (i <= n_press + n_hold) {
            fv[i] = 3.0 - sag_n * (static_cast<double>(i - n_press) * dt) / hold_s;
        } else {
            // Counted down from the end so the last sample is exactly 0.
            fv[i] = lift_rate * (static_cast<double>(n_force - 1 - i) * dt);
        }
    }

    // --- thermal traces: pre-contact idle, then first-order responses ----
    const auto n_thermal = static_cast<std::size_t>(std::llround(31.5 / dt)) + 1;
    std::vector<double> tt(n_thermal), tv(n_thermal), qt(n_thermal), qv(n_thermal);
    const double t_skin0 = 33.5;  // [degC] resting fingertip
    for (std::size_t i = 0; i < n_thermal; ++i) {
        const double t = static_cast<double>(i) * dt;
        tt[i] = t;
        qt[i] = t;
        if (t < contact_t) {
            tv[i] = t_skin0;
            qv[i] = 0.0;
        } else {
            const double u = t - contact_t;
            tv[i] = t_skin0 - p.delta_t * (1.0 - std::exp(-u / p.tau_t));
            qv[i] = p.q_step + (1.0 - std::exp(-u / p.tau_r)) *
                                   (p.q_ss - p.q_step + (p.q0 - p.q_ss) * std::exp(-u / p.tau_q));
        }
    }

    // --- image: grating, flat field, or noise field ----------------------
    const std::size_t w = 1000, h = 200;
    std::vector<std::uint8_t> px(w * h);
    Rng rng(seed ^ detail::fnv1a(kind));
    if (p.period_px > 0) {
        for (std::size_t x = 0; x < w; ++x) {
            const double s = std::sin(2.0 * std::numbers::pi * static_cast<double>(x) /
                                      static_cast<double>(p.period_px));
            const auto level = static_cast<std::uint8_t>(
                std::llround(static_cast<double>(p.base_level) + 100.0 * s));
            for (std::size_t y = 0; y < h; ++y) px[y * w + x] = level;
        }
    } else if (p.period_px == 0) {
        for (auto& v : px) v = static_cast<std::uint8_t>(p.base_level);
    } else {
        for (auto& v : px) {
            v = static_cast<std::uint8_t>(rng.uniform_int(p.base_level - 40, p.base_level + 40));
        }
    }

    return TextureRecording{
        kind,
        TimeSeries(std::move(ft), std::move(fv), Unit::Newton),
        TimeSeries(std::move(tt), std::move(tv), Unit::Celsius),
        TimeSeries(std::move(qt), std::move(qv), Unit::WattPerM2),
        SurfaceImage(w, h, std::move(px), 0.05),
        p.conductivity,
        {},
    };
}

}  // namespace ringtex
