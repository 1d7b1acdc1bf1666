#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "ringtex/command_set.hpp"
#include "ringtex/csv.hpp"
#include "ringtex/errors.hpp"

namespace ringtex {

struct PneumaticParams {
    double supply_kpa = 75.0;       // [kPa] regulator setting
    double fill_tau = 0.02;         // [s] chamber rise constant, valve ON
    double vent_tau = 0.025;        // [s] chamber decay constant, valve OFF
    double syringe_gain = 6.0;      // [kPa/mm] sealed-mode pressure per travel
    double valve_f_max = 300.0;     // [Hz]
};

struct ThermalPlantParams {
    double hot_tank_c = 42.5;       // [degC]
    double cold_tank_c = 4.0;       // [degC]
    double mix_volume_l = 0.25;     // [l]
    double pump_max_lps = 0.04;     // [l/s] per supply pump at full duty
    double tube_tau = 3.0;          // [s] tube surface lag behind mix
    double kp = 0.4;                // [duty/degC]
    double ambient_c = 22.0;        // [degC]
    double ambient_tau = 120.0;     // [s] tube heat loss to ambient
};

struct PlantParams {
    PneumaticParams pneumatic;
    ThermalPlantParams thermal;
};

struct PlantState {
    double chamber_kpa = 0.0;
    double mix_temp_c = 22.0;
    double tube_temp_c = 22.0;
    bool isolation_open = true;
    bool fast_valve_on = false;
    double syringe_pos_mm = 0.0;
    double t = 0.0;  // advanced by the session loop, not the step functions
};

// One explicit-Euler step of the pneumatic circuit. Isolation open: the
// fast valve either feeds the chamber from the supply or vents it.
// Isolation closed: sealed volume, pressure follows the syringe alone.
inline PlantState step_pneumatic(PlantState state, const PneumaticParams& p, bool fast_valve_on,
                                 bool isolation_open, double syringe_speed, double dt) {
    if (!(dt > 0.0) || dt > (1.0 + 1e-9) / (10.0 * p.valve_f_max)) {
        throw StepSizeError("dt must be positive and at most 1/(10*valve_f_max)");
    }
    if (isolation_open) {
        const double target = fast_valve_on ? p.supply_kpa : 0.0;
        const double tau = fast_valve_on ? p.fill_tau : p.vent_tau;
        state.chamber_kpa += dt / tau * (target - state.chamber_kpa);
    } else if (syringe_speed != 0.0) {
        state.chamber_kpa += p.syringe_gain * syringe_speed * dt;
    }
    state.chamber_kpa = std::clamp(state.chamber_kpa, 0.0, p.supply_kpa);
    state.syringe_pos_mm += syringe_speed * dt;
    state.fast_valve_on = fast_valve_on;
    state.isolation_open = isolation_open;
    return state;
}

// Proportional pump command; the hot and cold pumps never run together.
inline std::pair<double, double> pump_control(double t_target, double t_measured, double kp) {
    const double e = t_target - t_measured;
    return {std::clamp(kp * e, 0.0, 1.0), std::clamp(-kp * e, 0.0, 1.0)};
}

// One explicit-Euler step of the hydraulic loop: proportional pumps blend
// tank water into the (loss-compensated) mixing tank; the tube surface
// follows the mix with a first-order lag and bleeds toward ambient.
inline PlantState step_thermal(PlantState state, const ThermalPlantParams& p, double t_target,
                               double dt) {
    if (!(dt > 0.0) || dt > (1.0 + 1e-9) * p.tube_tau / 10.0) {
        throw StepSizeError("dt must be positive and at most tube_tau/10");
    }
    const auto [hot_duty, cold_duty] = pump_control(t_target, state.tube_temp_c, p.kp);
    const double flow_rate = p.pump_max_lps / p.mix_volume_l;  // [1/s] at full duty
    state.mix_temp_c += dt * flow_rate *
                        (hot_duty * (p.hot_tank_c - state.mix_temp_c) +
                         cold_duty * (p.cold_tank_c - state.mix_temp_c));
    state.tube_temp_c += dt * ((state.mix_temp_c - state.tube_temp_c) / p.tube_tau +
                               (p.ambient_c - state.tube_temp_c) / p.ambient_tau);
    return state;
}

struct SessionConfig {
    double dt = 1.0 / 3000.0;       // [s]
    double prep_tolerance_c = 0.3;  // [degC] gate to end preparation
    double prep_settle_s = 2.0;     // [s] the error must hold inside the band
    double prep_timeout_s = 120.0;  // [s] simulated
    double countdown_s = 5.0;       // [s]
    double slide_hold_c = 33.0;     // [degC] thermal target during sliding
    std::size_t log_every = 10;     // log row cadence in steps
};

struct LogRow {
    double t;             // [s]
    int phase;            // index into session_phase_names()
    double chamber_kpa;
    double mix_temp_c;
    double tube_temp_c;
    double target_c;
    bool fast_valve_on;
    bool isolation_open;
    double syringe_pos_mm;
};

struct SessionEvent {
    std::string name;
    double t;  // [s]
};

struct SessionMetrics {
    double prep_duration_s = 0.0;
    double press_track_max_c = 0.0;   // max |tube - target|, press time > 2 s
    double press_track_mean_c = 0.0;  // mean over the same window
    double slide_ripple_kpa = 0.0;    // max - min chamber, last 0.5 s of slide
    double slide_mean_kpa = 0.0;      // mean chamber over the same window
};

struct SessionLog {
    std::vector<LogRow> rows;
    std::vector<SessionEvent> events;
    SessionMetrics metrics;
    double dt = 0.0;
};

inline const std::vector<std::string>& session_phase_names() {
    static const std::vector<std::string> names = {"slide", "prepare", "countdown", "press"};
    return names;
}

// Full session script: slide (vibration, constant temperature), preparation
// (drive the tube to the thermal command's starting value), countdown, then
// press-wait-lift (sealed chamber follows the syringe, thermal loop tracks
// the polynomial trajectory).
inline SessionLog run_session(const CommandSet& cmd, const PlantParams& params,
                              const SessionConfig& cfg) {
    SessionLog log;
    log.dt = cfg.dt;
    PlantState s;
    s.mix_temp_c = params.thermal.ambient_c;
    s.tube_temp_c = params.thermal.ambient_c;

    std::size_t step_count = 0;
    double target = cfg.slide_hold_c;
    int phase = 0;
    auto log_row = [&](bool force) {
        if (force || step_count % cfg.log_every == 0) {
            log.rows.push_back({s.t, phase, s.chamber_kpa, s.mix_temp_c, s.tube_temp_c, target,
                                s.fast_valve_on, s.isolation_open, s.syringe_pos_mm});
        }
    };

    // --- slide: isolation open, fast valve replays the roughness wave ----
    log.events.push_back({"slide_start", s.t});
    const double slide_dur = cmd.roughness.duration;
    const auto n_slide = static_cast<std::size_t>(std::llround(slide_dur / cfg.dt));
    std::size_t cursor = 0;
    bool valve = cmd.roughness.transitions.empty() ? false
                                                   : !cmd.roughness.transitions.front().on;
    double ripple_lo = 0.0, ripple_hi = 0.0, ripple_sum = 0.0;
    std::size_t ripple_n = 0;
    for (std::size_t i = 0; i < n_slide; ++i) {
        while (cursor < cmd.roughness.transitions.size() &&
               cmd.roughness.transitions[cursor].time <= s.t + 1e-12) {
            valve = cmd.roughness.transitions[cursor].on;
            ++cursor;
        }
        log_row(false);
        s = step_pneumatic(s, params.pneumatic, valve, true, 0.0, cfg.dt);
        s = step_thermal(s, params.thermal, target, cfg.dt);
        s.t += cfg.dt;
        ++step_count;
        if (s.t >= slide_dur - 0.5) {
            ripple_lo = ripple_n == 0 ? s.chamber_kpa : std::min(ripple_lo, s.chamber_kpa);
            ripple_hi = ripple_n == 0 ? s.chamber_kpa : std::max(ripple_hi, s.chamber_kpa);
            ripple_sum += s.chamber_kpa;
            ++ripple_n;
        }
    }
    if (ripple_n > 0) {
        log.metrics.slide_ripple_kpa = ripple_hi - ripple_lo;
        log.metrics.slide_mean_kpa = ripple_sum / static_cast<double>(ripple_n);
    }

    // --- preparation: drive tube temperature to the command's start ------
    // The gate demands the error HOLD inside the band, not merely touch it:
    // the proportional loop is underdamped, and a first crossing still
    // carries enough stored heat in the mixing tank to ring for seconds.
    phase = 1;
    target = cmd.thermal_initial();
    log.events.push_back({"prepare_start", s.t});
    const double prep_t0 = s.t;
    double held_s = 0.0;
    while (std::abs(s.tube_temp_c - target) >= cfg.prep_tolerance_c ||
           held_s < cfg.prep_settle_s) {
        if (s.t - prep_t0 > cfg.prep_timeout_s) {
            throw PreparationTimeoutError("tube temperature cannot reach " +
                                          format_double(target) + " degC within " +
                                          format_double(cfg.prep_timeout_s) + " s");
        }
        log_row(false);
        s = step_pneumatic(s, params.pneumatic, false, true, 0.0, cfg.dt);
        s = step_thermal(s, params.thermal, target, cfg.dt);
        s.t += cfg.dt;
        ++step_count;
        held_s = std::abs(s.tube_temp_c - target) < cfg.prep_tolerance_c ? held_s + cfg.dt
                                                                         : 0.0;
    }
    log.metrics.prep_duration_s = s.t - prep_t0;
    log.events.push_back({"prepare_done", s.t});

    // --- countdown: hold everything ready -------------------------------
    phase = 2;
    log.events.push_back({"countdown_start", s.t});
    const auto n_count = static_cast<std::size_t>(std::llround(cfg.countdown_s / cfg.dt));
    for (std::size_t i = 0; i < n_count; ++i) {
        log_row(false);
        s = step_pneumatic(s, params.pneumatic, false, true, 0.0, cfg.dt);
        s = step_thermal(s, params.thermal, target, cfg.dt);
        s.t += cfg.dt;
        ++step_count;
    }

    // --- press-wait-lift: sealed chamber, thermal tracks the polynomial --
    phase = 3;
    log.events.push_back({"press_start", s.t});
    const double press_t0 = s.t;
    const double total = cmd.pressure.total_duration();
    const double lift_at = cmd.pressure.segments[0].duration + cmd.pressure.segments[1].duration;
    const auto n_press = static_cast<std::size_t>(std::llround(total / cfg.dt));
    bool lift_marked = false;
    double track_sum = 0.0, track_max = 0.0;
    std::size_t track_n = 0;
    for (std::size_t i = 0; i < n_press; ++i) {
        const double phase_t = s.t - press_t0;
        if (!lift_marked && phase_t >= lift_at - 1e-9) {
            log.events.push_back({"lift_start", s.t});
            lift_marked = true;
        }
        target = cmd.thermal_at_phase(phase_t);
        const double speed = profile_at(cmd.pressure, phase_t).second;
        log_row(false);
        s = step_pneumatic(s, params.pneumatic, false, false, speed, cfg.dt);
        s = step_thermal(s, params.thermal, target, cfg.dt);
        s.t += cfg.dt;
        ++step_count;
        if (phase_t + cfg.dt > 2.0) {
            const double err = std::abs(s.tube_temp_c - cmd.thermal_at_phase(phase_t + cfg.dt));
            track_max = std::max(track_max, err);
            track_sum += err;
            ++track_n;
        }
    }
    if (!lift_marked) {
        log.events.push_back({"lift_start", s.t});
    }
    if (track_n > 0) {
        log.metrics.press_track_max_c = track_max;
        log.metrics.press_track_mean_c = track_sum / static_cast<double>(track_n);
    }
    log_row(true);
    return log;
}

inline void save_session_csv(const std::filesystem::path& path, const SessionLog& log) {
    std::string out =
        "time_s,phase,chamber_kpa,mix_temp_c,tube_temp_c,target_c,fast_valve,isolation,"
        "syringe_mm\n";
    for (const auto& r : log.rows) {
        out += format_double(r.t);
        out += ',';
        out += session_phase_names()[static_cast<std::size_t>(r.phase)];
        out += ',';
        out += format_double(r.chamber_kpa);
        out += ',';
        out += format_double(r.mix_temp_c);
        out += ',';
        out += format_double(r.tube_temp_c);
        out += ',';
        out += format_double(r.target_c);
        out += ',';
        out += r.fast_valve_on ? "1," : "0,";
        out += r.isolation_open ? "OPEN," : "CLOSED,";
        out += format_double(r.syringe_pos_mm);
        out += '\n';
    }
    write_file_atomic(path, out);
}

inline void save_session_events_json(const std::filesystem::path& path, const SessionLog& log) {
    nlohmann::json j;
    nlohmann::json evs = nlohmann::json::array();
    for (const auto& e : log.events) {
        evs.push_back({{"name", e.name}, {"time_s", e.t}});
    }
    j["events"] = evs;
    j["metrics"] = {
        {"prep_duration_s", log.metrics.prep_duration_s},
        {"press_track_max_c", log.metrics.press_track_max_c},
        {"press_track_mean_c", log.metrics.press_track_mean_c},
        {"slide_ripple_kpa", log.metrics.slide_ripple_kpa},
        {"slide_mean_kpa", log.metrics.slide_mean_kpa},
    };
    j["dt_s"] = log.dt;
    write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace ringtex
