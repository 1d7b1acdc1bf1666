#pragma once

#include <array>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "ringtex/csv.hpp"
#include "ringtex/errors.hpp"
#include "ringtex/roughness.hpp"
#include "ringtex/softness.hpp"
#include "ringtex/thermal.hpp"

namespace ringtex {

// The three renderer outputs for one texture. "thermal" carries the
// polynomial payload; the sampled display trace lives in its own CSV.
struct CommandSet {
    std::string name;
    PressureProfile pressure;
    std::array<double, 8> thermal_poly;
    double thermal_t_start;  // [s] tau = 0
    double thermal_t_end;    // [s] tau = 1
    double thermal_rmse;     // [degC]
    RoughnessWave roughness;

    double thermal_at_phase(double phase_t) const {
        const double span = thermal_t_end - thermal_t_start;
        const double tau = std::clamp(phase_t / span, 0.0, 1.0);
        return eval_poly(thermal_poly, tau);
    }
    double thermal_initial() const { return eval_poly(thermal_poly, 0.0); }
};

inline void save_command_set(const std::filesystem::path& path, const CommandSet& cs) {
    nlohmann::json j;
    j["name"] = cs.name;
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& s : cs.pressure.segments) {
        segs.push_back({{"duration_s", s.duration}, {"speed_mm_s", s.speed}});
    }
    j["pressure"] = {
        {"segments", segs},
        {"target_displacement_mm", cs.pressure.target_displacement},
        {"hold_duration_s", cs.pressure.hold_duration},
    };
    j["thermal"] = {
        {"poly_coeffs", cs.thermal_poly},
        {"t_start_s", cs.thermal_t_start},
        {"t_end_s", cs.thermal_t_end},
        {"fit_rmse_c", cs.thermal_rmse},
    };
    nlohmann::json trans = nlohmann::json::array();
    for (const auto& t : cs.roughness.transitions) {
        trans.push_back({{"time_s", t.time}, {"state", t.on ? "ON" : "OFF"}});
    }
    j["roughness"] = {
        {"transitions", trans},
        {"duration_s", cs.roughness.duration},
        {"nominal_speed_mm_s", cs.roughness.nominal_speed},
    };
    write_file_atomic(path, j.dump(2) + "\n");
}

inline CommandSet load_command_set(const std::filesystem::path& path) {
    const std::string context = path.string();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ManifestError("command set parse failed: " + std::string(e.what()) + ": " +
                            context);
    }
    try {
        CommandSet cs;
        cs.name = j.at("name").get<std::string>();
        const auto& pj = j.at("pressure");
        const auto& segs = pj.at("segments");
        if (segs.size() != 3) {
            throw ManifestError("pressure profile needs exactly 3 segments: " + context);
        }
        for (std::size_t i = 0; i < 3; ++i) {
            cs.pressure.segments[i] = {segs[i].at("duration_s").get<double>(),
                                       segs[i].at("speed_mm_s").get<double>()};
        }
        cs.pressure.target_displacement = pj.at("target_displacement_mm").get<double>();
        cs.pressure.hold_duration = pj.at("hold_duration_s").get<double>();
        const auto& tj = j.at("thermal");
        const auto coeffs = tj.at("poly_coeffs").get<std::vector<double>>();
        if (coeffs.size() != 8) {
            throw ManifestError("thermal polynomial needs 8 coefficients: " + context);
        }
        std::copy(coeffs.begin(), coeffs.end(), cs.thermal_poly.begin());
        cs.thermal_t_start = tj.at("t_start_s").get<double>();
        cs.thermal_t_end = tj.at("t_end_s").get<double>();
        cs.thermal_rmse = tj.at("fit_rmse_c").get<double>();
        const auto& rj = j.at("roughness");
        for (const auto& t : rj.at("transitions")) {
            const std::string state = t.at("state").get<std::string>();
            if (state != "ON" && state != "OFF") {
                throw ManifestError("roughness state must be ON or OFF: " + context);
            }
            cs.roughness.transitions.push_back({t.at("time_s").get<double>(), state == "ON"});
        }
        cs.roughness.duration = rj.at("duration_s").get<double>();
        cs.roughness.nominal_speed = rj.at("nominal_speed_mm_s").get<double>();
        return cs;
    } catch (const nlohmann::json::exception& e) {
        throw ManifestError("command set missing field: " + std::string(e.what()) + ": " +
                            context);
    }
}

}  // namespace ringtex
