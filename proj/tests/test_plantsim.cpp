// Pneumatic chamber and hydraulic loop integrators, proportional pump
// control, and the full session script. The oracles are discrete
// closed forms of the same recurrences (geometric series), so Euler
// bookkeeping bugs cannot hide behind an integration-error tolerance.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ringtex/command_set.hpp"
#include "ringtex/csv.hpp"
#include "ringtex/plantsim.hpp"
#include "ringtex/rng.hpp"

using namespace ringtex;

namespace {

std::filesystem::path scratch() {
    static bool ready = false;
    const std::filesystem::path dir = "tmp_plantsim";
    if (!ready) {
        std::filesystem::remove_all(dir);
        std::filesystem::create_directories(dir);
        ready = true;
    }
    return dir;
}

// Steady-state PWM ripple of the continuous-time plant: a square wave
// alternating half-periods of first-order rise toward the supply and
// first-order decay toward zero.
double ripple_continuous(double supply, double f_hz, double tau_fill, double tau_vent) {
    const double half = 1.0 / (2.0 * f_hz);
    const double a = std::exp(-half / tau_fill);
    const double b = std::exp(-half / tau_vent);
    return supply * (1.0 - a) * (1.0 - b) / (1.0 - a * b);
}

// Same fixed point for the explicit-Euler recurrence: one half-period of
// filling multiplies the distance to the supply by (1 - dt/tau)^k.
double ripple_euler(double supply, std::size_t k_fill, std::size_t k_vent, double dt,
                    double tau_fill, double tau_vent) {
    const double r1 = std::pow(1.0 - dt / tau_fill, static_cast<double>(k_fill));
    const double r2 = std::pow(1.0 - dt / tau_vent, static_cast<double>(k_vent));
    return supply * (1.0 - r1) * (1.0 - r2) / (1.0 - r1 * r2);
}

// Toggle the fast valve at f_hz for warm_s + measure_s and return the
// peak-to-peak chamber swing over the measurement tail.
double simulate_pwm(const PneumaticParams& p, double f_hz, double dt, double warm_s,
                    double measure_s) {
    PlantState s;
    const auto n = static_cast<std::size_t>(std::llround((warm_s + measure_s) / dt));
    double lo = 0.0, hi = 0.0;
    bool seen = false;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * dt;
        const bool on = static_cast<std::size_t>(std::floor(t * 2.0 * f_hz + 1e-9)) % 2 == 0;
        s = step_pneumatic(s, p, on, true, 0.0, dt);
        if (t >= warm_s) {
            lo = seen ? std::min(lo, s.chamber_kpa) : s.chamber_kpa;
            hi = seen ? std::max(hi, s.chamber_kpa) : s.chamber_kpa;
            seen = true;
        }
    }
    return hi - lo;
}

// Flat temperature trajectory; the wave and trapezoid are small so the
// script stays fast.
CommandSet tiny_command_set(double hold_c, double slide_s) {
    CommandSet cs;
    cs.name = "tiny";
    cs.pressure.segments = {{{0.5, 4.0}, {3.0, 0.0}, {0.8, -2.5}}};
    cs.pressure.target_displacement = 2.0;
    cs.pressure.hold_duration = 3.0;
    cs.thermal_poly = {hold_c, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    cs.thermal_t_start = 0.0;
    cs.thermal_t_end = cs.pressure.total_duration();
    cs.thermal_rmse = 0.0;
    cs.roughness.duration = slide_s;
    cs.roughness.nominal_speed = 50.0;
    return cs;
}

}  // namespace

TEST_CASE("step size guards") {
    PlantState s;
    PneumaticParams pn;
    ThermalPlantParams th;
    REQUIRE_THROWS_AS(step_pneumatic(s, pn, false, true, 0.0, 0.0), StepSizeError);
    REQUIRE_THROWS_AS(step_pneumatic(s, pn, false, true, 0.0, -0.001), StepSizeError);
    REQUIRE_THROWS_AS(step_pneumatic(s, pn, false, true, 0.0, 1.01 / 3000.0), StepSizeError);
    REQUIRE_NOTHROW(step_pneumatic(s, pn, false, true, 0.0, 1.0 / 3000.0));
    pn.valve_f_max = 100.0;  // tighter valve budget moves the bound
    REQUIRE_THROWS_AS(step_pneumatic(s, pn, false, true, 0.0, 1.0 / 999.0), StepSizeError);
    REQUIRE_NOTHROW(step_pneumatic(s, pn, false, true, 0.0, 1.0 / 1000.0));

    REQUIRE_THROWS_AS(step_thermal(s, th, 33.0, 0.0), StepSizeError);
    REQUIRE_THROWS_AS(step_thermal(s, th, 33.0, 0.301), StepSizeError);
    REQUIRE_NOTHROW(step_thermal(s, th, 33.0, 0.3));
}

TEST_CASE("sealed chamber follows the syringe exactly") {
    PneumaticParams pn;
    const double dt = 1.0 / 3000.0;
    Rng rng(41);

    PlantState s;
    s.chamber_kpa = 20.0;
    double oracle = 20.0;
    double pos = 0.0;
    for (int k = 0; k < 400; ++k) {
        const double speed = rng.uniform(-1.5, 1.5);
        // The fast valve must be ignored while the chamber is sealed.
        const bool noise_valve = rng.uniform(0.0, 1.0) < 0.5;
        s = step_pneumatic(s, pn, noise_valve, false, speed, dt);
        oracle += pn.syringe_gain * speed * dt;
        pos += speed * dt;
        REQUIRE(s.chamber_kpa == Catch::Approx(oracle).margin(1e-9));
        REQUIRE(s.syringe_pos_mm == Catch::Approx(pos).margin(1e-12));
    }

    // Clamps at both ends of the sealed range.
    for (int k = 0; k < 3000; ++k) s = step_pneumatic(s, pn, false, false, -5.0, dt);
    REQUIRE(s.chamber_kpa == 0.0);
    for (int k = 0; k < 30000; ++k) s = step_pneumatic(s, pn, false, false, 5.0, dt);
    REQUIRE(s.chamber_kpa == pn.supply_kpa);

    // Zero speed seals the pressure perfectly.
    const double before = 33.25;
    PlantState z;
    z.chamber_kpa = before;
    for (int k = 0; k < 100; ++k) z = step_pneumatic(z, pn, true, false, 0.0, dt);
    REQUIRE(z.chamber_kpa == before);
}

TEST_CASE("fill and vent match the geometric-series closed form") {
    PneumaticParams pn;
    const double dt = 1.0 / 3000.0;

    PlantState s;
    const double r_fill = 1.0 - dt / pn.fill_tau;
    for (int n = 1; n <= 600; ++n) {
        s = step_pneumatic(s, pn, true, true, 0.0, dt);
        const double want = pn.supply_kpa * (1.0 - std::pow(r_fill, n));
        REQUIRE(s.chamber_kpa == Catch::Approx(want).margin(1e-9));
    }

    const double p0 = s.chamber_kpa;
    const double r_vent = 1.0 - dt / pn.vent_tau;
    for (int n = 1; n <= 600; ++n) {
        s = step_pneumatic(s, pn, false, true, 0.0, dt);
        REQUIRE(s.chamber_kpa == Catch::Approx(p0 * std::pow(r_vent, n)).margin(1e-9));
    }
}

TEST_CASE("fill converges to the continuous exponential at first order") {
    PneumaticParams pn;
    const double t_probe = 0.05;  // [s]
    auto max_err = [&](double dt) {
        PlantState s;
        const auto n = static_cast<std::size_t>(std::llround(t_probe / dt));
        double worst = 0.0;
        for (std::size_t i = 1; i <= n; ++i) {
            s = step_pneumatic(s, pn, true, true, 0.0, dt);
            const double t = static_cast<double>(i) * dt;
            const double exact = pn.supply_kpa * (1.0 - std::exp(-t / pn.fill_tau));
            worst = std::max(worst, std::abs(s.chamber_kpa - exact));
        }
        return worst;
    };
    const double e1 = max_err(1.0 / 3000.0);
    const double e2 = max_err(1.0 / 6000.0);
    const double e4 = max_err(1.0 / 12000.0);
    REQUIRE(e2 < 0.6 * e1);
    REQUIRE(e4 < 0.6 * e2);
}

TEST_CASE("pwm ripple matches the closed forms") {
    PneumaticParams pn;
    const double f = pn.valve_f_max;  // 300 Hz square wave
    const double dt = 1.0 / 3000.0;

    const double sim = simulate_pwm(pn, f, dt, 1.0, 0.01);
    const double cont = ripple_continuous(pn.supply_kpa, f, pn.fill_tau, pn.vent_tau);
    const double eul = ripple_euler(pn.supply_kpa, 5, 5, dt, pn.fill_tau, pn.vent_tau);

    // The discrete fixed point is an exact description of steady state.
    REQUIRE(sim == Catch::Approx(eul).margin(1e-9));
    // The continuous closed form is the physical reference.
    REQUIRE(std::abs(sim - cont) / cont < 0.05);

    // Halving the step barely moves the answer.
    const double sim_half = simulate_pwm(pn, f, dt / 2.0, 1.0, 0.01);
    REQUIRE(std::abs(sim_half - sim) / sim < 0.01);
    REQUIRE(sim_half == Catch::Approx(ripple_euler(pn.supply_kpa, 10, 10, dt / 2.0, pn.fill_tau,
                                                   pn.vent_tau))
                            .margin(1e-9));
    // And it moves it toward the continuous answer.
    REQUIRE(std::abs(sim_half - cont) < std::abs(sim - cont));
}

TEST_CASE("pump duties are proportional, saturated, and exclusive") {
    const double kp = 0.4;
    auto [h1, c1] = pump_control(36.0, 26.0, kp);  // error +10 -> hot saturates
    REQUIRE(h1 == 1.0);
    REQUIRE(c1 == 0.0);
    auto [h2, c2] = pump_control(20.0, 30.0, kp);  // error -10 -> cold saturates
    REQUIRE(h2 == 0.0);
    REQUIRE(c2 == 1.0);
    auto [h3, c3] = pump_control(33.0, 32.0, kp);
    REQUIRE(h3 == Catch::Approx(0.4).margin(1e-12));
    REQUIRE(c3 == 0.0);
    auto [h4, c4] = pump_control(25.0, 25.0, kp);
    REQUIRE(h4 == 0.0);
    REQUIRE(c4 == 0.0);

    Rng rng(7);
    for (int k = 0; k < 500; ++k) {
        auto [h, c] = pump_control(rng.uniform(4.0, 42.5), rng.uniform(4.0, 42.5), kp);
        REQUIRE(h >= 0.0);
        REQUIRE(h <= 1.0);
        REQUIRE(c >= 0.0);
        REQUIRE(c <= 1.0);
        REQUIRE((h == 0.0 || c == 0.0));
    }
}

TEST_CASE("saturated heating matches the two-pole discrete closed form") {
    // With the target pinned far above the hot tank the hot pump stays at
    // full duty, so the mixing tank is a pure geometric series and the tube
    // is its convolution with a second pole -- solvable by hand.
    ThermalPlantParams th;
    const double dt = 1.0 / 3000.0;
    const double target = 60.0;

    const double flow = th.pump_max_lps / th.mix_volume_l;
    const double r_m = 1.0 - dt * flow;
    const double r_t = 1.0 - dt / th.tube_tau - dt / th.ambient_tau;
    const double mix_a = th.hot_tank_c;
    const double mix_b = th.ambient_c - th.hot_tank_c;  // mix_n = a + b r_m^n
    const double tube_ss = (mix_a / th.tube_tau + th.ambient_c / th.ambient_tau) /
                           (1.0 / th.tube_tau + 1.0 / th.ambient_tau);
    const double d = dt / th.tube_tau * mix_b * r_m / (r_m - r_t);
    const double e = th.ambient_c - tube_ss - d;

    REQUIRE(tube_ss == Catch::Approx(42.0).margin(1e-12));  // (40*42.5 + 22)/41

    PlantState s;
    for (int n = 1; n <= 3000; ++n) {
        s = step_thermal(s, th, target, dt);
        REQUIRE(pump_control(target, s.tube_temp_c, th.kp).first == 1.0);
        const double mix_want = mix_a + mix_b * std::pow(r_m, n);
        const double tube_want = tube_ss + d * std::pow(r_m, n) + e * std::pow(r_t, n);
        REQUIRE(s.mix_temp_c == Catch::Approx(mix_want).margin(1e-8));
        REQUIRE(s.tube_temp_c == Catch::Approx(tube_want).margin(1e-8));
    }

    // Long-run ceiling: the tube can never settle above 42 degC, which is
    // why a 44 degC command is unreachable.
    PlantState lng;
    const double dt2 = 0.05;
    for (int n = 0; n < 4000; ++n) lng = step_thermal(lng, th, target, dt2);
    REQUIRE(lng.tube_temp_c == Catch::Approx(42.0).margin(0.05));
    REQUIRE(lng.tube_temp_c < 42.0 + 1e-9);
}

TEST_CASE("closed-loop step response settles on the target") {
    ThermalPlantParams th;
    const double dt = 0.01;
    PlantState s;
    double tube_max = s.tube_temp_c;
    double tube_min = s.tube_temp_c;
    for (int n = 0; n < 6000; ++n) {  // 60 s at the 36 degC setpoint
        s = step_thermal(s, th, 36.0, dt);
        tube_max = std::max(tube_max, s.tube_temp_c);
        tube_min = std::min(tube_min, s.tube_temp_c);
    }
    // The two-pole cascade under proportional control rings, but the decay
    // rate is pinned at 1/(2 tube_tau), so 60 s settles it completely.
    REQUIRE(tube_min == 22.0);        // never undershoots the start
    REQUIRE(tube_max < 36.0 + 1.5);   // bounded overshoot
    REQUIRE(s.tube_temp_c == Catch::Approx(36.0).margin(0.05));
    // Equilibrium mix runs warm to offset the ambient bleed.
    REQUIRE(s.mix_temp_c == Catch::Approx(36.0 + (36.0 - 22.0) * 3.0 / 120.0).margin(0.05));
}

TEST_CASE("thermal integrator converges at first order in dt") {
    ThermalPlantParams th;
    auto tube_at = [&](double dt, double t_end) {
        PlantState s;
        const auto n = static_cast<std::size_t>(std::llround(t_end / dt));
        for (std::size_t i = 0; i < n; ++i) s = step_thermal(s, th, 36.0, dt);
        return s.tube_temp_c;
    };
    const double ref = tube_at(0.0005, 5.0);
    const double c1 = tube_at(0.02, 5.0);
    const double c2 = tube_at(0.01, 5.0);
    const double c3 = tube_at(0.005, 5.0);
    REQUIRE(std::abs(c2 - ref) < 0.6 * std::abs(c1 - ref));
    REQUIRE(std::abs(c3 - ref) < 0.6 * std::abs(c2 - ref));
}

TEST_CASE("session script: phases, events, and bookkeeping") {
    CommandSet cs = tiny_command_set(33.0, 1.0);
    cs.roughness = uniform_wave(25.0, 1.0, 50.0);
    PlantParams params;
    params.pneumatic.valve_f_max = 50.0;  // allows a 1/500 s step
    SessionConfig cfg;
    cfg.dt = 1.0 / 500.0;

    const SessionLog log = run_session(cs, params, cfg);

    REQUIRE(log.events.size() == 6);
    const std::vector<std::string> names = {"slide_start", "prepare_start", "prepare_done",
                                            "countdown_start", "press_start", "lift_start"};
    for (std::size_t i = 0; i < names.size(); ++i) REQUIRE(log.events[i].name == names[i]);
    for (std::size_t i = 1; i < log.events.size(); ++i) {
        REQUIRE(log.events[i].t >= log.events[i - 1].t);
    }

    REQUIRE(log.events[0].t == 0.0);
    REQUIRE(log.events[1].t == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(log.events[3].t == log.events[2].t);
    REQUIRE(log.events[4].t == Catch::Approx(log.events[3].t + cfg.countdown_s).margin(1e-6));
    // Lift fires when the press + hold segments have elapsed.
    REQUIRE(log.events[5].t ==
            Catch::Approx(log.events[4].t + 3.5).margin(cfg.dt + 1e-9));

    REQUIRE(log.metrics.prep_duration_s == log.events[2].t - log.events[1].t);
    REQUIRE(log.metrics.prep_duration_s > cfg.prep_settle_s);
    REQUIRE(log.metrics.prep_duration_s < 60.0);

    // Phases only move forward, and every phase shows up.
    int prev_phase = 0;
    bool saw[4] = {false, false, false, false};
    for (const auto& r : log.rows) {
        REQUIRE(r.phase >= prev_phase);
        REQUIRE(r.phase <= 3);
        prev_phase = r.phase;
        saw[r.phase] = true;
    }
    for (bool b : saw) REQUIRE(b);

    // Rows are on the log_every cadence; time starts at zero and the forced
    // final row lands after the last step.
    REQUIRE(log.rows.front().t == 0.0);
    for (std::size_t i = 1; i + 1 < log.rows.size(); ++i) {
        REQUIRE(log.rows[i].t - log.rows[i - 1].t ==
                Catch::Approx(cfg.dt * static_cast<double>(cfg.log_every)).margin(1e-9));
    }
    const double total_press = cs.pressure.total_duration();
    REQUIRE(log.rows.back().t ==
            Catch::Approx(log.events[4].t + total_press).margin(cfg.dt + 1e-9));

    // The chamber is sealed exactly for the press phase (rows log the state
    // carried out of the previous step).
    for (const auto& r : log.rows) {
        if (r.phase < 3) REQUIRE(r.isolation_open);
    }
    REQUIRE_FALSE(log.rows.back().isolation_open);

    // The trapezoid is net-zero, so the syringe comes home.
    REQUIRE(log.rows.back().syringe_pos_mm == Catch::Approx(0.0).margin(0.02));

    // Sealed pressure peaks at gain * displacement and returns to rest.
    double peak = 0.0;
    for (const auto& r : log.rows) {
        if (r.phase == 3) peak = std::max(peak, r.chamber_kpa);
    }
    REQUIRE(peak == Catch::Approx(params.pneumatic.syringe_gain * 2.0).margin(0.1));
    REQUIRE(log.rows.back().chamber_kpa == Catch::Approx(0.0).margin(0.1));

    // During the press the logged target replays the polynomial.
    for (const auto& r : log.rows) {
        if (r.phase == 3) {
            REQUIRE(r.target_c ==
                    Catch::Approx(cs.thermal_at_phase(r.t - log.events[4].t)).margin(1e-9));
        } else if (r.phase == 0) {
            REQUIRE(r.target_c == cfg.slide_hold_c);
        }
    }

    // Flat trajectory, gentle plant: tracking stays tight after the grace
    // window.
    REQUIRE(log.metrics.press_track_max_c < 0.5);
    REQUIRE(log.metrics.press_track_mean_c <= log.metrics.press_track_max_c);
}

TEST_CASE("session script: quiet wave keeps the chamber flat") {
    CommandSet cs = tiny_command_set(33.0, 1.0);  // no transitions at all
    PlantParams params;
    params.pneumatic.valve_f_max = 50.0;
    SessionConfig cfg;
    cfg.dt = 1.0 / 500.0;

    const SessionLog log = run_session(cs, params, cfg);
    for (const auto& r : log.rows) {
        if (r.phase == 0) {
            REQUIRE(r.chamber_kpa == 0.0);
            REQUIRE_FALSE(r.fast_valve_on);
        }
    }
    REQUIRE(log.metrics.slide_ripple_kpa == 0.0);
    REQUIRE(log.metrics.slide_mean_kpa == 0.0);
}

TEST_CASE("session script: latched wave saturates the chamber") {
    CommandSet cs = tiny_command_set(33.0, 1.0);
    cs.roughness.transitions = {{0.0, true}};
    PlantParams params;
    params.pneumatic.valve_f_max = 50.0;
    SessionConfig cfg;
    cfg.dt = 1.0 / 500.0;

    const SessionLog log = run_session(cs, params, cfg);
    REQUIRE(log.metrics.slide_mean_kpa > 74.9);
    REQUIRE(log.metrics.slide_ripple_kpa < 0.1);
}

TEST_CASE("session script: pwm wave reproduces the analytic ripple") {
    CommandSet cs = tiny_command_set(33.0, 1.0);
    cs.roughness = uniform_wave(300.0, 1.0, 50.0);
    PlantParams params;  // default valve budget forces dt <= 1/3000
    SessionConfig cfg;

    const SessionLog log = run_session(cs, params, cfg);
    const double cont = ripple_continuous(params.pneumatic.supply_kpa, 300.0,
                                          params.pneumatic.fill_tau, params.pneumatic.vent_tau);
    REQUIRE(std::abs(log.metrics.slide_ripple_kpa - cont) / cont < 0.05);
    REQUIRE(log.metrics.slide_mean_kpa > 0.2 * params.pneumatic.supply_kpa);
    REQUIRE(log.metrics.slide_mean_kpa < 0.8 * params.pneumatic.supply_kpa);
}

TEST_CASE("session script: unreachable preparation target times out") {
    CommandSet cs = tiny_command_set(44.0, 0.2);  // above the 42 degC ceiling
    PlantParams params;
    params.pneumatic.valve_f_max = 50.0;
    SessionConfig cfg;
    cfg.dt = 1.0 / 500.0;
    cfg.prep_timeout_s = 15.0;
    REQUIRE_THROWS_AS(run_session(cs, params, cfg), PreparationTimeoutError);
}

TEST_CASE("session log round trips through csv and json") {
    CommandSet cs = tiny_command_set(33.0, 0.5);
    cs.roughness = uniform_wave(25.0, 0.5, 50.0);
    PlantParams params;
    params.pneumatic.valve_f_max = 50.0;
    SessionConfig cfg;
    cfg.dt = 1.0 / 500.0;

    const SessionLog log = run_session(cs, params, cfg);
    const auto csv_path = scratch() / "session.csv";
    const auto json_path = scratch() / "events.json";
    save_session_csv(csv_path, log);
    save_session_events_json(json_path, log);

    const std::string content = read_file(csv_path);
    const auto lines = split_lines(content);
    REQUIRE(lines.size() == log.rows.size() + 1);
    REQUIRE(lines[0] ==
            "time_s,phase,chamber_kpa,mix_temp_c,tube_temp_c,target_c,fast_valve,isolation,"
            "syringe_mm");
    const auto first = split_fields(lines[1]);
    REQUIRE(first.size() == 9);
    REQUIRE(first[0] == "0");
    REQUIRE(first[1] == "slide");
    REQUIRE(first[7] == "OPEN");
    const auto last = split_fields(lines.back());
    REQUIRE(last[1] == "press");
    REQUIRE(last[7] == "CLOSED");
    REQUIRE(parse_double(last[4], "tube") == Catch::Approx(log.rows.back().tube_temp_c));

    const auto j = nlohmann::json::parse(read_file(json_path));
    REQUIRE(j.at("events").size() == 6);
    REQUIRE(j.at("events")[0].at("name") == "slide_start");
    REQUIRE(j.at("events")[0].at("time_s") == 0.0);
    REQUIRE(j.at("dt_s") == cfg.dt);
    REQUIRE(j.at("metrics").at("prep_duration_s").get<double>() ==
            log.metrics.prep_duration_s);
    REQUIRE(j.at("metrics").contains("press_track_max_c"));
    REQUIRE(j.at("metrics").contains("slide_ripple_kpa"));

    // Determinism: a rerun writes the same bytes.
    const SessionLog again = run_session(cs, params, cfg);
    const auto csv2 = scratch() / "session2.csv";
    save_session_csv(csv2, again);
    REQUIRE(read_file(csv2) == content);
}

TEST_CASE("log cadence of one records every step") {
    CommandSet cs = tiny_command_set(33.0, 0.2);
    PlantParams params;
    params.pneumatic.valve_f_max = 50.0;
    SessionConfig cfg;
    cfg.dt = 1.0 / 500.0;
    cfg.log_every = 1;

    const SessionLog log = run_session(cs, params, cfg);
    for (std::size_t i = 1; i < log.rows.size(); ++i) {
        REQUIRE(log.rows[i].t - log.rows[i - 1].t == Catch::Approx(cfg.dt).margin(1e-9));
    }
}
