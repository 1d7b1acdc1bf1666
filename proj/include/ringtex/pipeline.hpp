#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ringtex/command_set.hpp"
#include "ringtex/config.hpp"
#include "ringtex/evalstats.hpp"
#include "ringtex/fixtures.hpp"
#include "ringtex/plantsim.hpp"
#include "ringtex/recording.hpp"
#include "ringtex/roughness.hpp"
#include "ringtex/softness.hpp"
#include "ringtex/thermal.hpp"

namespace ringtex {

struct RenderedTexture {
    CommandSet commands;
    SlopePair slopes;
    double rise_speed;   // [mm/s]
    double fall_speed;   // [mm/s]
    std::size_t transitions;
    std::vector<std::string> warnings;
};

struct RenderSummary {
    double slope_min;  // [N/s] range used by the speed map
    double slope_max;
    std::vector<RenderedTexture> textures;
};

// Renders the selected textures. The slope range for the speed map comes
// from the fitted press slopes of the WHOLE configured set (unless the
// config pins it), so rendering one texture or all of them maps softness
// identically.
inline RenderSummary render_textures(const RunConfig& cfg,
                                     const std::vector<std::string>& selection) {
    if (cfg.manifests.empty()) {
        throw ConfigError("config lists no texture manifests");
    }
    struct Loaded {
        TextureRecording rec;
        PressPhases phases;
        SlopePair slopes;
    };
    std::vector<Loaded> all;
    for (const auto& m : cfg.manifests) {
        auto rec = load_recording(m);
        auto phases = segment_phases(rec.press_force, cfg.softness.smoothing_window_s,
                                     cfg.softness.delta_lift);
        auto slopes = compute_slopes(rec.press_force, phases);
        all.push_back({std::move(rec), phases, slopes});
    }

    SoftnessConfig soft = cfg.softness;
    if (!(soft.slope_min < soft.slope_max)) {
        double lo = all.front().slopes.press_slope;
        double hi = lo;
        for (const auto& l : all) {
            lo = std::min(lo, l.slopes.press_slope);
            hi = std::max(hi, l.slopes.press_slope);
        }
        if (hi - lo < 1e-12) {
            // Single texture (or identical slopes): widen symmetrically so
            // the affine map stays defined; it lands mid-range.
            lo *= 0.8;
            hi = hi * 1.2 + 1e-9;
        }
        soft.slope_min = lo;
        soft.slope_max = hi;
    }

    for (const auto& want : selection) {
        if (std::none_of(all.begin(), all.end(),
                         [&](const Loaded& l) { return l.rec.name == want; })) {
            throw ConfigError("texture '" + want + "' is not in the configured set");
        }
    }

    RenderSummary summary;
    summary.slope_min = soft.slope_min;
    summary.slope_max = soft.slope_max;
    for (auto& l : all) {
        if (!selection.empty() &&
            std::find(selection.begin(), selection.end(), l.rec.name) == selection.end()) {
            continue;
        }
        auto profile = build_profile(l.slopes, soft);
        auto thermal = render_thermal(l.rec, cfg.thermal);
        auto wave = render_roughness(l.rec, cfg.roughness);
        RenderedTexture rt{
            CommandSet{l.rec.name, profile, thermal.poly_coeffs, thermal.t_start, thermal.t_end,
                       thermal.fit_rmse, std::move(wave)},
            l.slopes,
            profile.segments[0].speed,
            -profile.segments[2].speed,
            0,
            {},
        };
        rt.transitions = rt.commands.roughness.transitions.size();
        rt.warnings = thermal.warnings;
        for (const auto& w : l.rec.warnings) rt.warnings.push_back(w);

        // The sampled display trace goes to its own CSV; render the full
        // thermal command once more is avoided by reusing `thermal` here.
        const auto& dir = cfg.out_dir;
        save_profile_csv(dir / (l.rec.name + "_pressure.csv"), profile,
                         cfg.softness.profile_rate_hz);
        save_thermal_csv(dir / (l.rec.name + "_thermal.csv"), thermal);
        save_thermal_poly_json(dir / (l.rec.name + "_thermal_poly.json"), thermal);
        save_wave_csv(dir / (l.rec.name + "_roughness.csv"), rt.commands.roughness);
        save_wave_dense_csv(dir / (l.rec.name + "_roughness_dense.csv"), rt.commands.roughness,
                            cfg.roughness.dense_rate_hz);
        save_command_set(dir / (l.rec.name + "_commandset.json"), rt.commands);
        summary.textures.push_back(std::move(rt));
    }
    if (summary.textures.empty()) {
        throw ConfigError("selection matches no configured texture");
    }

    nlohmann::json j;
    j["slope_range_n_s"] = {summary.slope_min, summary.slope_max};
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& rt : summary.textures) {
        arr.push_back({
            {"name", rt.commands.name},
            {"press_slope_n_s", rt.slopes.press_slope},
            {"lift_slope_n_s", rt.slopes.lift_slope},
            {"rise_speed_mm_s", rt.rise_speed},
            {"fall_speed_mm_s", rt.fall_speed},
            {"thermal_fit_rmse_c", rt.commands.thermal_rmse},
            {"roughness_transitions", rt.transitions},
            {"warnings", rt.warnings},
        });
    }
    j["textures"] = arr;
    write_file_atomic(cfg.out_dir / "render_manifest.json", j.dump(2) + "\n");
    return summary;
}

// Drives a rendered command set through the plant and writes the log pair.
inline SessionLog simulate_command_set(const RunConfig& cfg,
                                       const std::filesystem::path& commandset_path,
                                       const std::filesystem::path& out_dir) {
    const auto cs = load_command_set(commandset_path);
    auto log = run_session(cs, cfg.plant, cfg.session);
    save_session_csv(out_dir / (cs.name + "_session.csv"), log);
    save_session_events_json(out_dir / (cs.name + "_events.json"), log);
    return log;
}

// ---------------------------------------------------------------------------
// Synthetic trial data and the evaluation report
// ---------------------------------------------------------------------------

inline void save_trials_csv(const std::filesystem::path& path,
                            const std::vector<TrialRecord>& trials) {
    std::string out = "participant,round,presented,selected,flat_bumpy,cold_hot,soft_stiff\n";
    for (const auto& t : trials) {
        out += t.participant;
        out += ',';
        out += std::to_string(t.round);
        out += ',';
        out += t.presented;
        out += ',';
        out += t.selected;
        out += ',';
        out += format_double(t.flat_bumpy);
        out += ',';
        out += format_double(t.cold_hot);
        out += ',';
        out += format_double(t.soft_stiff);
        out += '\n';
    }
    write_file_atomic(path, out);
}

// 15 participants x 4 rounds x 6 textures; round 1 is the training round
// the analysis excludes. Per-texture accuracies and rating centers are
// fixed; the seed shuffles which trials are the errors and jitters ratings.
inline std::vector<TrialRecord> generate_trials(std::uint64_t seed) {
    const auto& kinds = texture_kinds();
    // Per kind: accuracy over the scored rounds, the two confusable
    // alternatives, and rating centers (flat-bumpy, cold-hot, soft-stiff).
    struct Profile {
        double accuracy;
        std::size_t alt1, alt2;
        double bumpy, hot, stiff;
    };
    const std::array<Profile, 6> profiles = {{
        {0.9, 1, 5, 75.0, 20.0, 85.0},    // rough_metal
        {0.9, 0, 4, 15.0, 20.0, 88.0},    // smooth_metal
        {0.622, 3, 5, 65.0, 60.0, 15.0},  // rough_foam
        {0.45, 2, 4, 20.0, 62.0, 10.0},   // smooth_foam
        {0.45, 3, 1, 45.0, 50.0, 60.0},   // cardboard
        {0.9, 2, 4, 55.0, 55.0, 40.0},    // fabric
    }};
    const int participants = 15;
    const int rounds = 4;
    Rng rng(seed ^ 0x7261746974696f6eull);

    std::vector<TrialRecord> trials;
    for (std::size_t k = 0; k < kinds.size(); ++k) {
        const auto& prof = profiles[k];
        // Scored trials (rounds 2..4): hit the accuracy exactly, spreading
        // errors over a seeded shuffle of the trial slots.
        const int scored = participants * (rounds - 1);
        const auto correct_n = static_cast<int>(std::llround(prof.accuracy * scored));
        std::vector<int> slot(static_cast<std::size_t>(scored));
        std::iota(slot.begin(), slot.end(), 0);
        for (std::size_t i = slot.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
            std::swap(slot[i - 1], slot[j]);
        }
        std::vector<bool> correct(static_cast<std::size_t>(scored));
        for (int i = 0; i < correct_n; ++i) correct[static_cast<std::size_t>(slot[i])] = true;

        int scored_idx = 0;
        int err_toggle = 0;
        for (int p = 1; p <= participants; ++p) {
            for (int r = 1; r <= rounds; ++r) {
                TrialRecord t;
                t.participant = "p" + std::string(p < 10 ? "0" : "") + std::to_string(p);
                t.round = r;
                t.presented = kinds[k];
                bool ok;
                if (r == 1) {
                    ok = rng.uniform() < 0.5;  // unscored training round
                } else {
                    ok = correct[static_cast<std::size_t>(scored_idx++)];
                }
                if (ok) {
                    t.selected = kinds[k];
                } else {
                    t.selected = kinds[(err_toggle++ % 2 == 0) ? prof.alt1 : prof.alt2];
                }
                auto rate = [&](double center) {
                    return std::clamp(std::round(rng.normal(center, 8.0)), 0.0, 100.0);
                };
                t.flat_bumpy = rate(prof.bumpy);
                t.cold_hot = rate(prof.hot);
                t.soft_stiff = rate(prof.stiff);
                trials.push_back(std::move(t));
            }
        }
    }
    return trials;
}

// Writes the six fixtures, a ready-to-run config, and a synthetic trials
// file; returns the manifest paths in canonical order.
inline std::vector<std::filesystem::path> write_fixture_tree(const std::filesystem::path& dir,
                                                             std::uint64_t seed) {
    std::vector<std::filesystem::path> manifests;
    std::vector<std::string> names;
    for (const auto& kind : texture_kinds()) {
        const auto rec = generate_fixture(kind, seed);
        manifests.push_back(save_recording(dir, rec));
        names.push_back(manifests.back().filename().string());
    }
    write_file_atomic(dir / "config.json", default_config_json(names));
    save_trials_csv(dir / "trials_synthetic.csv", generate_trials(seed));
    return manifests;
}

struct EvalReport {
    ConfusionMatrix confusion;
    ChiSquaredResult chi;
    std::vector<std::pair<std::string, KruskalWallisResult>> kruskal;  // per dimension
    // (dimension, texture) -> KS screening result
    std::vector<std::tuple<std::string, std::string, KsResult>> ks;
};

inline EvalReport evaluate_trials(const std::vector<TrialRecord>& trials, int exclude_round = 1) {
    EvalReport rep{build_confusion(trials, exclude_round), {}, {}, {}};
    rep.chi = chi_squared_vs_chance(rep.confusion);

    const std::array<std::pair<const char*, double TrialRecord::*>, 3> dims = {{
        {"flat_bumpy", &TrialRecord::flat_bumpy},
        {"cold_hot", &TrialRecord::cold_hot},
        {"soft_stiff", &TrialRecord::soft_stiff},
    }};
    const auto& kinds = texture_kinds();
    for (const auto& [dim_name, member] : dims) {
        std::vector<std::vector<double>> groups(kinds.size());
        for (const auto& t : trials) {
            if (t.round == exclude_round) continue;
            groups[texture_index(t.presented)].push_back(t.*member);
        }
        std::vector<std::vector<double>> nonempty;
        for (std::size_t k = 0; k < kinds.size(); ++k) {
            if (!groups[k].empty()) {
                nonempty.push_back(groups[k]);
                try {
                    rep.ks.emplace_back(dim_name, kinds[k], ks_normality(groups[k]));
                } catch (const ZeroVarianceError&) {
                    // Constant ratings carry no distribution to screen.
                } catch (const SchemaError&) {
                    // Too few samples for the screening test; skip quietly.
                }
            }
        }
        if (nonempty.size() >= 2) {
            rep.kruskal.emplace_back(dim_name, kruskal_wallis(nonempty));
        }
    }
    return rep;
}

namespace detail {

inline std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

inline std::string fixed3(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

}  // namespace detail

inline void save_eval_report(const std::filesystem::path& out_dir, const EvalReport& rep) {
    const auto& kinds = texture_kinds();

    std::string conf = "presented";
    for (const auto& k : kinds) conf += "," + k;
    conf += ",row_total\n";
    for (std::size_t r = 0; r < 6; ++r) {
        conf += kinds[r];
        std::size_t row = 0;
        for (std::size_t c = 0; c < 6; ++c) {
            conf += ',' + std::to_string(rep.confusion.counts[r][c]);
            row += rep.confusion.counts[r][c];
        }
        conf += ',' + std::to_string(row) + '\n';
    }
    write_file_atomic(out_dir / "confusion.csv", conf);

    std::string stats = "test,dimension,group,statistic,dof,p_value,reject_at_05\n";
    stats += "chi_squared_vs_chance,,," + format_double(rep.chi.statistic) + ',' +
             std::to_string(rep.chi.dof_independence) + ',' +
             format_double(rep.chi.p_independence) + ',' +
             (rep.chi.p_independence < 0.05 ? "1" : "0") + '\n';
    stats += "chi_squared_vs_chance_by_row,,," + format_double(rep.chi.statistic) + ',' +
             std::to_string(rep.chi.dof_goodness) + ',' + format_double(rep.chi.p_goodness) +
             ',' + (rep.chi.p_goodness < 0.05 ? "1" : "0") + '\n';
    for (const auto& [dim, kw] : rep.kruskal) {
        stats += "kruskal_wallis," + std::string(dim) + ",," + format_double(kw.h) + ',' +
                 std::to_string(kw.dof) + ',' + format_double(kw.p) + ',' +
                 (kw.p < 0.05 ? "1" : "0") + '\n';
    }
    for (const auto& [dim, kind, ks] : rep.ks) {
        stats += "ks_normality," + dim + ',' + kind + ',' + format_double(ks.d) + ",," +
                 format_double(ks.p) + ',' + (ks.reject_at_05 ? "1" : "0") + '\n';
    }
    write_file_atomic(out_dir / "stats.csv", stats);

    std::string rpt;
    rpt += "Confusion matrix (rows = presented, cols = selected), N = " +
           std::to_string(rep.chi.n) + "\n\n";
    rpt += detail::pad("", 14);
    for (const auto& k : kinds) rpt += detail::pad(k, 14);
    rpt += '\n';
    for (std::size_t r = 0; r < 6; ++r) {
        rpt += detail::pad(kinds[r], 14);
        for (std::size_t c = 0; c < 6; ++c) {
            rpt += detail::pad(std::to_string(rep.confusion.counts[r][c]) + " (" +
                                   detail::fixed3(rep.confusion.proportions[r][c]) + ")",
                               14);
        }
        rpt += '\n';
    }
    rpt += "\nPearson chi-squared vs. 1/6 chance: statistic = " +
           detail::fixed3(rep.chi.statistic) + "\n";
    rpt += "  dof = " + std::to_string(rep.chi.dof_independence) +
           " (independence-table convention), p = " + format_double(rep.chi.p_independence) +
           "\n";
    rpt += "  dof = " + std::to_string(rep.chi.dof_goodness) +
           " (goodness-of-fit per row), p = " + format_double(rep.chi.p_goodness) + "\n";
    rpt += "\nKruskal-Wallis by presented texture:\n";
    for (const auto& [dim, kw] : rep.kruskal) {
        rpt += "  " + detail::pad(dim, 12) + "H = " + detail::fixed3(kw.h) +
               ", dof = " + std::to_string(kw.dof) + ", p = " + format_double(kw.p) + '\n';
    }
    rpt += "\nKS normality screening (estimated parameters; conservative):\n";
    for (const auto& [dim, kind, ks] : rep.ks) {
        rpt += "  " + detail::pad(dim, 12) + detail::pad(kind, 14) +
               "D = " + detail::fixed3(ks.d) + ", crit(5%) = " + detail::fixed3(ks.critical) +
               (ks.reject_at_05 ? ", reject normality\n" : ", no rejection\n");
    }
    write_file_atomic(out_dir / "report.txt", rpt);
}

}  // namespace ringtex
