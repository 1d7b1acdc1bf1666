#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "ringtex/csv.hpp"
#include "ringtex/errors.hpp"
#include "ringtex/recording.hpp"
#include "ringtex/surface_image.hpp"

namespace ringtex {

struct PeakSet {
    std::vector<std::size_t> maxima;  // pixel indices, ascending
    std::vector<std::size_t> minima;  // pixel indices, ascending
    std::size_t length_px = 0;        // scanline length, sets the wave span
};

struct WaveTransition {
    double time;  // [s]
    bool on;      // true = valve ON
};

// Binary valve drive. State before the first transition is the opposite of
// that transition's state; with no transitions the wave is constant OFF.
struct RoughnessWave {
    std::vector<WaveTransition> transitions;
    double duration = 0.0;       // [s]
    double nominal_speed = 0.0;  // [mm/s]
};

struct RoughnessConfig {
    std::size_t kernel_px = 3;
    double prominence_frac = 0.05;  // of the scanline intensity range
    double speed_mm_s = 50.0;
    double f_max_hz = 300.0;
    double duration_s = 10.0;       // slide phase length
    double dense_rate_hz = 1000.0;  // plotting trace export rate
    std::map<std::string, double> manual_frequency_override;  // texture -> Hz
};

namespace detail {

struct Candidate {
    std::size_t index;
    double prominence;
};

// Interior local maxima; a plateau counts once, at its midpoint.
inline std::vector<std::size_t> local_maxima(const std::vector<double>& v) {
    std::vector<std::size_t> peaks;
    const std::size_t n = v.size();
    std::size_t i = 1;
    while (i + 1 < n) {
        if (v[i - 1] < v[i]) {
            std::size_t j = i;  // right edge of the plateau starting at i
            while (j + 1 < n && v[j + 1] == v[i]) ++j;
            if (j + 1 < n && v[j + 1] < v[i]) {
                peaks.push_back((i + j) / 2);
            }
            i = j + 1;
        } else {
            ++i;
        }
    }
    return peaks;
}

// Prominence: drop from the peak to the higher of the two bases, where each
// base is the minimum between the peak and the nearest strictly higher
// sample (or the signal border).
inline double prominence_of(const std::vector<double>& v, std::size_t p) {
    double left_min = v[p];
    for (std::size_t i = p; i-- > 0;) {
        if (v[i] > v[p]) break;
        left_min = std::min(left_min, v[i]);
    }
    double right_min = v[p];
    for (std::size_t i = p + 1; i < v.size(); ++i) {
        if (v[i] > v[p]) break;
        right_min = std::min(right_min, v[i]);
    }
    return v[p] - std::max(left_min, right_min);
}

// Threshold by prominence, then keep greedily in descending prominence
// (ties to the lower index) subject to the pairwise separation bound.
inline std::vector<Candidate> select_peaks(const std::vector<double>& v,
                                           std::size_t min_separation_px,
                                           double min_prominence) {
    std::vector<Candidate> cands;
    for (std::size_t p : local_maxima(v)) {
        const double prom = prominence_of(v, p);
        if (prom >= min_prominence) cands.push_back({p, prom});
    }
    std::vector<std::size_t> order(cands.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return cands[a].prominence > cands[b].prominence;
    });
    std::vector<bool> kept(cands.size(), false);
    for (std::size_t oi : order) {
        bool ok = true;
        for (std::size_t j = 0; j < cands.size(); ++j) {
            if (!kept[j]) continue;
            const std::size_t a = cands[oi].index, b = cands[j].index;
            if ((a > b ? a - b : b - a) < min_separation_px) {
                ok = false;
                break;
            }
        }
        if (ok) kept[oi] = true;
    }
    std::vector<Candidate> out;
    for (std::size_t i = 0; i < cands.size(); ++i) {
        if (kept[i]) out.push_back(cands[i]);
    }
    return out;
}

}  // namespace detail

inline PeakSet detect_peaks(const ScanSignal& signal, std::size_t min_separation_px,
                            double min_prominence) {
    if (min_separation_px < 1) {
        throw ConfigError("min_separation_px must be >= 1");
    }
    if (min_prominence < 0.0) {
        throw ConfigError("min_prominence must be >= 0");
    }
    const auto& v = signal.intensities;
    auto maxima = detail::select_peaks(v, min_separation_px, min_prominence);
    std::vector<double> neg(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) neg[i] = -v[i];
    auto minima = detail::select_peaks(neg, min_separation_px, min_prominence);

    // Valve semantics need strict max/min alternation: of two consecutive
    // same-type peaks the less prominent one is dropped.
    struct Tagged {
        std::size_t index;
        double prominence;
        bool is_max;
    };
    std::vector<Tagged> merged;
    for (const auto& c : maxima) merged.push_back({c.index, c.prominence, true});
    for (const auto& c : minima) merged.push_back({c.index, c.prominence, false});
    std::sort(merged.begin(), merged.end(),
              [](const Tagged& a, const Tagged& b) { return a.index < b.index; });
    std::vector<Tagged> kept;
    for (const auto& t : merged) {
        if (!kept.empty() && kept.back().is_max == t.is_max) {
            if (t.prominence > kept.back().prominence) kept.back() = t;
        } else {
            kept.push_back(t);
        }
    }
    PeakSet out;
    out.length_px = v.size();
    for (const auto& t : kept) {
        (t.is_max ? out.maxima : out.minima).push_back(t.index);
    }
    return out;
}

inline double min_gap_s(double f_max) { return 1.0 / (2.0 * f_max); }

inline void validate_wave(const RoughnessWave& w, double f_max) {
    const double gap = min_gap_s(f_max) - 1e-12;
    for (std::size_t i = 1; i < w.transitions.size(); ++i) {
        if (!(w.transitions[i].time > w.transitions[i - 1].time)) {
            throw RenderError("wave transitions not strictly increasing");
        }
        if (w.transitions[i].on == w.transitions[i - 1].on) {
            throw RenderError("wave states fail to alternate");
        }
        if (w.transitions[i].time - w.transitions[i - 1].time < gap) {
            throw RenderError("wave violates the valve's minimum half-period");
        }
    }
}

// Dense toggle runs are replaced by a uniform square wave at exactly f_max
// over the run's original time span.
inline RoughnessWave cap_frequency(const RoughnessWave& wave, double f_max) {
    const double gap = min_gap_s(f_max);
    const auto& in = wave.transitions;
    std::vector<WaveTransition> out;
    out.reserve(in.size());
    std::size_t i = 0;
    while (i < in.size()) {
        std::size_t j = i;
        while (j + 1 < in.size() && in[j + 1].time - in[j].time < gap - 1e-12) ++j;
        if (j == i) {
            out.push_back(in[i]);
            ++i;
            continue;
        }
        const double span = in[j].time - in[i].time;
        const auto n = static_cast<std::size_t>(std::floor(span / gap + 1e-9)) + 1;
        bool state = in[i].on;
        for (std::size_t k = 0; k < n; ++k) {
            out.push_back({in[i].time + static_cast<double>(k) * gap, state});
            state = !state;
        }
        i = j + 1;
    }
    // Replacement can flip run parity; drop any transition that no longer
    // toggles the state.
    std::vector<WaveTransition> clean;
    clean.reserve(out.size());
    for (const auto& t : out) {
        if (clean.empty() || clean.back().on != t.on) clean.push_back(t);
    }
    return RoughnessWave{std::move(clean), wave.duration, wave.nominal_speed};
}

// Pixel peaks to timed valve toggles: minima open the valve, maxima close
// it, pixel p fires at p * mm_per_pixel / speed.
inline RoughnessWave build_wave(const PeakSet& peaks, double mm_per_pixel, double speed = 50.0,
                                double f_max = 300.0) {
    if (!(speed > 0.0) || !(f_max > 0.0)) {
        throw ConfigError("speed and f_max must be positive");
    }
    struct Ev {
        std::size_t px;
        bool on;
    };
    std::vector<Ev> evs;
    for (std::size_t p : peaks.minima) evs.push_back({p, true});
    for (std::size_t p : peaks.maxima) evs.push_back({p, false});
    std::sort(evs.begin(), evs.end(), [](const Ev& a, const Ev& b) { return a.px < b.px; });
    RoughnessWave w;
    w.nominal_speed = speed;
    w.duration = static_cast<double>(peaks.length_px) * mm_per_pixel / speed;
    for (const auto& e : evs) {
        w.transitions.push_back({static_cast<double>(e.px) * mm_per_pixel / speed, e.on});
    }
    w = cap_frequency(w, f_max);
    validate_wave(w, f_max);
    return w;
}

// Repeats the wave to fill total_duration (assumes spatially uniform
// texture). A tile's first transition is dropped when the previous tile
// already left the valve in that state.
inline RoughnessWave tile_wave(const RoughnessWave& wave, double total_duration) {
    RoughnessWave out;
    out.nominal_speed = wave.nominal_speed;
    out.duration = total_duration;
    if (wave.transitions.empty() || !(wave.duration > 0.0)) {
        return out;
    }
    for (std::size_t k = 0;; ++k) {
        const double offset = static_cast<double>(k) * wave.duration;
        if (offset >= total_duration - 1e-12) break;
        bool appended = false;
        for (const auto& t : wave.transitions) {
            const double tt = t.time + offset;
            if (tt >= total_duration - 1e-12) break;
            if (!out.transitions.empty() && out.transitions.back().on == t.on) continue;
            out.transitions.push_back({tt, t.on});
            appended = true;
        }
        if (!appended && offset > 0.0) break;  // nothing fits past this point
    }
    return out;
}

// Uniform square wave at freq_hz starting with an ON pulse at t = 0.
inline RoughnessWave uniform_wave(double freq_hz, double duration, double speed) {
    RoughnessWave w;
    w.duration = duration;
    w.nominal_speed = speed;
    const double half = 1.0 / (2.0 * freq_hz);
    bool state = true;
    for (std::size_t k = 0;; ++k) {
        const double t = static_cast<double>(k) * half;
        if (t >= duration - 1e-12) break;
        w.transitions.push_back({t, state});
        state = !state;
    }
    return w;
}

inline std::size_t min_separation_px(double speed, double f_max, double mm_per_pixel) {
    return static_cast<std::size_t>(
        std::ceil(speed / (2.0 * f_max * mm_per_pixel) - 1e-9));
}

// Image -> valve wave pipeline; fine textures can bypass it with a manual
// frequency from the config.
inline RoughnessWave render_roughness(const TextureRecording& rec, const RoughnessConfig& cfg) {
    if (auto it = cfg.manual_frequency_override.find(rec.name);
        it != cfg.manual_frequency_override.end()) {
        if (!(it->second > 0.0) || it->second > cfg.f_max_hz) {
            throw ConfigError("manual frequency override for '" + rec.name +
                              "' outside (0, f_max]");
        }
        return uniform_wave(it->second, cfg.duration_s, cfg.speed_mm_s);
    }
    const auto filtered = mean_filter(rec.image, cfg.kernel_px);
    const auto scan = extract_scanline(filtered);
    const auto [lo, hi] = std::minmax_element(scan.intensities.begin(), scan.intensities.end());
    const double min_prom = cfg.prominence_frac * (*hi - *lo);
    const std::size_t min_sep =
        std::max<std::size_t>(1, min_separation_px(cfg.speed_mm_s, cfg.f_max_hz,
                                                   rec.image.mm_per_pixel));
    const auto peaks = detect_peaks(scan, min_sep, min_prom);
    const auto wave = build_wave(peaks, rec.image.mm_per_pixel, cfg.speed_mm_s, cfg.f_max_hz);
    // Tiling can leave a joint gap shorter than the valve half-period when a
    // capped run ends near the tile boundary; re-capping repairs the joints.
    auto tiled = cap_frequency(tile_wave(wave, cfg.duration_s), cfg.f_max_hz);
    validate_wave(tiled, cfg.f_max_hz);
    return tiled;
}

inline bool wave_state_at(const RoughnessWave& w, double t) {
    // State before the first transition is that transition's opposite.
    bool state = w.transitions.empty() ? false : !w.transitions.front().on;
    for (const auto& tr : w.transitions) {
        if (tr.time > t) break;
        state = tr.on;
    }
    return state;
}

inline void save_wave_csv(const std::filesystem::path& path, const RoughnessWave& w) {
    std::string out = "time_s,state\n";
    for (const auto& t : w.transitions) {
        out += format_double(t.time);
        out += t.on ? ",ON\n" : ",OFF\n";
    }
    write_file_atomic(path, out);
}

inline void save_wave_dense_csv(const std::filesystem::path& path, const RoughnessWave& w,
                                double rate_hz) {
    std::string out = "time_s,state\n";
    const auto n = static_cast<std::size_t>(std::floor(w.duration * rate_hz + 1e-9));
    std::size_t next = 0;
    bool state = w.transitions.empty() ? false : !w.transitions.front().on;
    for (std::size_t k = 0; k <= n; ++k) {
        const double t = static_cast<double>(k) / rate_hz;
        while (next < w.transitions.size() && w.transitions[next].time <= t) {
            state = w.transitions[next].on;
            ++next;
        }
        out += format_double(t);
        out += state ? ",1\n" : ",0\n";
    }
    write_file_atomic(path, out);
}

}  // namespace ringtex
