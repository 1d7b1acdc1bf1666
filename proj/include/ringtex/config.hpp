#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ringtex/csv.hpp"
#include "ringtex/errors.hpp"
#include "ringtex/plantsim.hpp"
#include "ringtex/roughness.hpp"
#include "ringtex/softness.hpp"
#include "ringtex/thermal.hpp"

namespace ringtex {

struct RunConfig {
    std::vector<std::filesystem::path> manifests;
    std::filesystem::path out_dir = "out";
    SoftnessConfig softness;
    ThermalConfig thermal;
    RoughnessConfig roughness;
    PlantParams plant;
    SessionConfig session;
};

namespace detail {

// Strict section reader: unknown keys are config errors so typos cannot
// silently fall back to defaults.
class Section {
public:
    Section(const nlohmann::json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) {
            throw ConfigError("config section '" + name_ + "' must be an object");
        }
        for (const auto& el : j_.items()) keys_.push_back(el.key());
    }

    ~Section() = default;

    double num(const char* key, double fallback) {
        mark(key);
        auto it = j_.find(key);
        if (it == j_.end()) return fallback;
        if (!it->is_number()) {
            throw ConfigError("config key '" + name_ + "." + key + "' must be a number");
        }
        return it->get<double>();
    }

    bool has(const char* key) const { return j_.contains(key); }

    const nlohmann::json* raw(const char* key) {
        mark(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (const auto& k : keys_) {
            if (std::find(seen_.begin(), seen_.end(), k) == seen_.end()) {
                throw ConfigError("unknown config key '" + name_ + "." + k + "'");
            }
        }
    }

private:
    void mark(const char* key) { seen_.emplace_back(key); }

    const nlohmann::json& j_;
    std::string name_;
    std::vector<std::string> keys_;
    std::vector<std::string> seen_;
};

}  // namespace detail

// Loads a RunConfig; every field is optional except the manifest list.
// Relative paths resolve against the config file's directory.
inline RunConfig load_run_config(const std::filesystem::path& path, bool check_paths = true) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const MissingFileError&) {
        throw ConfigError("cannot open config " + path.string());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config parse failed: " + std::string(e.what()) + ": " +
                          path.string());
    }
    if (!j.is_object()) {
        throw ConfigError("config root must be a JSON object: " + path.string());
    }
    const auto dir = path.parent_path();
    RunConfig cfg;
    detail::Section root(j, "root");

    if (const auto* m = root.raw("manifests")) {
        if (!m->is_array()) {
            throw ConfigError("config key 'manifests' must be an array of paths");
        }
        for (const auto& v : *m) {
            cfg.manifests.push_back(dir / v.get<std::string>());
        }
    }
    if (const auto* o = root.raw("out_dir")) {
        cfg.out_dir = dir / o->get<std::string>();
    }

    if (const auto* s = root.raw("softness")) {
        detail::Section sec(*s, "softness");
        if (const auto* r = sec.raw("slope_range_n_s")) {
            if (!r->is_array() || r->size() != 2) {
                throw ConfigError("softness.slope_range_n_s must be [min, max]");
            }
            cfg.softness.slope_min = (*r)[0].get<double>();
            cfg.softness.slope_max = (*r)[1].get<double>();
            if (!(cfg.softness.slope_min < cfg.softness.slope_max)) {
                throw ConfigError("softness.slope_range_n_s must have min < max");
            }
        }
        if (const auto* r = sec.raw("speed_range_mm_s")) {
            if (!r->is_array() || r->size() != 2) {
                throw ConfigError("softness.speed_range_mm_s must be [min, max]");
            }
            cfg.softness.speed_min = (*r)[0].get<double>();
            cfg.softness.speed_max = (*r)[1].get<double>();
        }
        cfg.softness.target_displacement =
            sec.num("target_displacement_mm", cfg.softness.target_displacement);
        cfg.softness.hold_duration = sec.num("hold_duration_s", cfg.softness.hold_duration);
        cfg.softness.smoothing_window_s =
            sec.num("smoothing_window_s", cfg.softness.smoothing_window_s);
        cfg.softness.delta_lift = sec.num("delta_lift", cfg.softness.delta_lift);
        cfg.softness.profile_rate_hz = sec.num("profile_rate_hz", cfg.softness.profile_rate_hz);
        sec.finish();
        if (!(cfg.softness.speed_min < cfg.softness.speed_max) ||
            !(cfg.softness.speed_min > 0.0)) {
            throw ConfigError("softness speed range must be positive with min < max");
        }
        if (!(cfg.softness.target_displacement > 0.0) || !(cfg.softness.hold_duration > 0.0)) {
            throw ConfigError("softness displacement and hold duration must be positive");
        }
        if (!(cfg.softness.delta_lift > 0.0 && cfg.softness.delta_lift < 1.0)) {
            throw ConfigError("softness.delta_lift must be in (0, 1)");
        }
    }

    if (const auto* s = root.raw("thermal")) {
        detail::Section sec(*s, "thermal");
        cfg.thermal.r_skin_display = sec.num("r_skin_display", cfg.thermal.r_skin_display);
        cfg.thermal.skin_cutoff_hz = sec.num("skin_cutoff_hz", cfg.thermal.skin_cutoff_hz);
        cfg.thermal.flux_cutoff_hz = sec.num("flux_cutoff_hz", cfg.thermal.flux_cutoff_hz);
        cfg.thermal.onset_threshold_w_m2 =
            sec.num("onset_threshold_w_m2", cfg.thermal.onset_threshold_w_m2);
        cfg.thermal.onset_hold_s = sec.num("onset_hold_s", cfg.thermal.onset_hold_s);
        sec.finish();
        if (!(cfg.thermal.r_skin_display > 0.0) || !(cfg.thermal.skin_cutoff_hz > 0.0) ||
            !(cfg.thermal.flux_cutoff_hz > 0.0) || !(cfg.thermal.onset_threshold_w_m2 > 0.0) ||
            !(cfg.thermal.onset_hold_s > 0.0)) {
            throw ConfigError("thermal config values must be positive");
        }
    }

    if (const auto* s = root.raw("roughness")) {
        detail::Section sec(*s, "roughness");
        const double kernel = sec.num("kernel_px", static_cast<double>(cfg.roughness.kernel_px));
        if (kernel < 1.0 || kernel != std::floor(kernel) ||
            static_cast<std::size_t>(kernel) % 2 == 0) {
            throw ConfigError("roughness.kernel_px must be an odd positive integer");
        }
        cfg.roughness.kernel_px = static_cast<std::size_t>(kernel);
        cfg.roughness.prominence_frac = sec.num("prominence_frac", cfg.roughness.prominence_frac);
        cfg.roughness.speed_mm_s = sec.num("speed_mm_s", cfg.roughness.speed_mm_s);
        cfg.roughness.f_max_hz = sec.num("f_max_hz", cfg.roughness.f_max_hz);
        cfg.roughness.duration_s = sec.num("duration_s", cfg.roughness.duration_s);
        cfg.roughness.dense_rate_hz = sec.num("dense_rate_hz", cfg.roughness.dense_rate_hz);
        if (const auto* o = sec.raw("manual_frequency_override")) {
            if (!o->is_object()) {
                throw ConfigError("roughness.manual_frequency_override must map texture -> Hz");
            }
            for (const auto& el : o->items()) {
                cfg.roughness.manual_frequency_override[el.key()] = el.value().get<double>();
            }
        }
        sec.finish();
        if (!(cfg.roughness.prominence_frac >= 0.0) || !(cfg.roughness.speed_mm_s > 0.0) ||
            !(cfg.roughness.f_max_hz > 0.0) || !(cfg.roughness.duration_s > 0.0) ||
            !(cfg.roughness.dense_rate_hz > 0.0)) {
            throw ConfigError("roughness config values must be positive");
        }
    }

    if (const auto* s = root.raw("plant")) {
        detail::Section sec(*s, "plant");
        auto& pn = cfg.plant.pneumatic;
        pn.supply_kpa = sec.num("supply_kpa", pn.supply_kpa);
        pn.fill_tau = sec.num("fill_tau_s", pn.fill_tau);
        pn.vent_tau = sec.num("vent_tau_s", pn.vent_tau);
        pn.syringe_gain = sec.num("syringe_gain_kpa_mm", pn.syringe_gain);
        pn.valve_f_max = sec.num("valve_f_max_hz", pn.valve_f_max);
        auto& th = cfg.plant.thermal;
        th.hot_tank_c = sec.num("hot_tank_c", th.hot_tank_c);
        th.cold_tank_c = sec.num("cold_tank_c", th.cold_tank_c);
        th.mix_volume_l = sec.num("mix_volume_l", th.mix_volume_l);
        th.pump_max_lps = sec.num("pump_max_lps", th.pump_max_lps);
        th.tube_tau = sec.num("tube_tau_s", th.tube_tau);
        th.kp = sec.num("kp", th.kp);
        th.ambient_c = sec.num("ambient_c", th.ambient_c);
        th.ambient_tau = sec.num("ambient_tau_s", th.ambient_tau);
        sec.finish();
        if (!(pn.supply_kpa > 0.0) || !(pn.fill_tau > 0.0) || !(pn.vent_tau > 0.0) ||
            !(pn.syringe_gain > 0.0) || !(pn.valve_f_max > 0.0)) {
            throw ConfigError("pneumatic plant values must be positive");
        }
        if (!(th.hot_tank_c > th.cold_tank_c) || !(th.mix_volume_l > 0.0) ||
            !(th.pump_max_lps > 0.0) || !(th.tube_tau > 0.0) || !(th.kp > 0.0) ||
            !(th.ambient_tau > 0.0)) {
            throw ConfigError("thermal plant values out of range");
        }
    }

    if (const auto* s = root.raw("session")) {
        detail::Section sec(*s, "session");
        cfg.session.dt = sec.num("dt_s", cfg.session.dt);
        cfg.session.prep_tolerance_c = sec.num("prep_tolerance_c", cfg.session.prep_tolerance_c);
        cfg.session.prep_settle_s = sec.num("prep_settle_s", cfg.session.prep_settle_s);
        cfg.session.prep_timeout_s = sec.num("prep_timeout_s", cfg.session.prep_timeout_s);
        cfg.session.countdown_s = sec.num("countdown_s", cfg.session.countdown_s);
        cfg.session.slide_hold_c = sec.num("slide_hold_c", cfg.session.slide_hold_c);
        const double le = sec.num("log_every", static_cast<double>(cfg.session.log_every));
        if (le < 1.0 || le != std::floor(le)) {
            throw ConfigError("session.log_every must be a positive integer");
        }
        cfg.session.log_every = static_cast<std::size_t>(le);
        sec.finish();
        if (!(cfg.session.dt > 0.0) || !(cfg.session.prep_tolerance_c > 0.0) ||
            !(cfg.session.prep_timeout_s > 0.0) || cfg.session.countdown_s < 0.0 ||
            cfg.session.prep_settle_s < 0.0) {
            throw ConfigError("session config values out of range");
        }
    }
    root.finish();

    if (check_paths) {
        for (const auto& m : cfg.manifests) {
            if (!std::filesystem::exists(m)) {
                throw ConfigError("manifest does not exist: " + m.string());
            }
        }
    }
    return cfg;
}

// The config gen-fixtures drops next to the fixtures it wrote, giving a
// ready-to-run render/simulate setup.
inline std::string default_config_json(const std::vector<std::string>& manifest_files) {
    nlohmann::json j;
    j["manifests"] = manifest_files;
    j["out_dir"] = "../out";
    j["roughness"] = {{"manual_frequency_override", {{"fabric", 300.0}}}};
    return j.dump(2) + "\n";
}

}  // namespace ringtex
