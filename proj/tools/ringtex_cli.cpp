// Command-line front end: fixture generation, rendering, plant simulation,
// and study evaluation. Exit codes: 0 ok, 2 config, 3 ingestion, 4 render,
// 5 preparation timeout, 6 trials schema, 1 anything unexpected.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ringtex/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_gen_fixtures(const std::string& out, std::uint64_t seed) {
    const auto manifests = ringtex::write_fixture_tree(out, seed);
    for (const auto& m : manifests) {
        std::printf("wrote %s\n", m.string().c_str());
    }
    std::printf("wrote %s\n", (fs::path(out) / "config.json").string().c_str());
    std::printf("wrote %s\n", (fs::path(out) / "trials_synthetic.csv").string().c_str());
    return 0;
}

int cmd_render(const std::string& config_path, const std::vector<std::string>& textures,
               const std::string& out_override) {
    auto cfg = ringtex::load_run_config(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    const auto summary = ringtex::render_textures(cfg, textures);
    std::printf("slope range [%g, %g] N/s\n", summary.slope_min, summary.slope_max);
    for (const auto& rt : summary.textures) {
        std::printf("%s: rise %.3f mm/s, fall %.3f mm/s, fit rmse %.4f degC, %zu transitions\n",
                    rt.commands.name.c_str(), rt.rise_speed, rt.fall_speed,
                    rt.commands.thermal_rmse, rt.transitions);
        for (const auto& w : rt.warnings) {
            std::fprintf(stderr, "warning: %s: %s\n", rt.commands.name.c_str(), w.c_str());
        }
    }
    std::printf("outputs in %s\n", cfg.out_dir.string().c_str());
    return 0;
}

int cmd_simulate(const std::string& config_path, const std::vector<std::string>& textures,
                 const std::string& commands_dir, const std::string& out_override) {
    auto cfg = ringtex::load_run_config(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    const fs::path cmd_dir = commands_dir.empty() ? cfg.out_dir : fs::path(commands_dir);

    std::vector<fs::path> sets;
    if (textures.empty()) {
        if (!fs::is_directory(cmd_dir)) {
            throw ringtex::ConfigError("command directory not found: " + cmd_dir.string());
        }
        for (const auto& e : fs::directory_iterator(cmd_dir)) {
            const auto name = e.path().filename().string();
            if (name.size() > 16 && name.ends_with("_commandset.json")) {
                sets.push_back(e.path());
            }
        }
        std::sort(sets.begin(), sets.end());
        if (sets.empty()) {
            throw ringtex::ConfigError("no *_commandset.json in " + cmd_dir.string());
        }
    } else {
        for (const auto& t : textures) {
            sets.push_back(cmd_dir / (t + "_commandset.json"));
        }
    }
    for (const auto& p : sets) {
        const auto log = ringtex::simulate_command_set(cfg, p, cfg.out_dir);
        const auto name = p.filename().string().substr(
            0, p.filename().string().size() - std::string("_commandset.json").size());
        std::printf(
            "%s: prep %.2f s, slide ripple %.3f kPa (mean %.2f), "
            "press tracking max %.3f degC (mean %.3f)\n",
            name.c_str(), log.metrics.prep_duration_s, log.metrics.slide_ripple_kpa,
            log.metrics.slide_mean_kpa, log.metrics.press_track_max_c,
            log.metrics.press_track_mean_c);
    }
    std::printf("logs in %s\n", cfg.out_dir.string().c_str());
    return 0;
}

int cmd_eval(const std::string& trials_path, const std::string& out) {
    const auto trials = ringtex::load_trials_csv(trials_path);
    const auto rep = ringtex::evaluate_trials(trials);
    ringtex::save_eval_report(out, rep);
    const auto report = ringtex::read_file(fs::path(out) / "report.txt");
    std::fwrite(report.data(), 1, report.size(), stdout);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"texture rendering pipeline for a hydro-pneumatic haptic ring"};
    app.require_subcommand(1);

    std::string config_path, commands_dir, trials_path;
    std::string gen_out = "fixtures", run_out, eval_out = "out";
    std::vector<std::string> textures;
    std::uint64_t seed = 1234;
    bool all = false;

    auto* gen = app.add_subcommand("gen-fixtures", "write synthetic recordings and a config");
    gen->add_option("--out", gen_out, "output directory");
    gen->add_option("--seed", seed, "fixture RNG seed");

    auto add_selection = [&](CLI::App* sub) {
        auto* tex = sub->add_option("--texture", textures, "texture name (repeatable)");
        sub->add_flag("--all", all, "process every configured texture")->excludes(tex);
    };

    auto* render = app.add_subcommand("render", "turn recordings into actuator commands");
    render->add_option("--config", config_path, "run configuration")->required();
    add_selection(render);
    render->add_option("--out", run_out, "override the configured output directory");

    auto* sim = app.add_subcommand("simulate", "drive command sets through the plant model");
    sim->add_option("--config", config_path, "run configuration")->required();
    add_selection(sim);
    sim->add_option("--commands", commands_dir, "directory holding *_commandset.json");
    sim->add_option("--out", run_out, "override the configured output directory");

    auto* ev = app.add_subcommand("eval", "confusion matrix and statistics from trials");
    ev->add_option("--trials", trials_path, "trials CSV")->required();
    ev->add_option("--out", eval_out, "report directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // --help and friends exit 0 through CLI11; real parse errors are
        // configuration errors by this tool's convention.
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return cmd_gen_fixtures(gen_out, seed);
        if (render->parsed()) {
            if (!all && textures.empty()) {
                throw ringtex::ConfigError("pass --all or at least one --texture");
            }
            return cmd_render(config_path, textures, run_out);
        }
        if (sim->parsed()) {
            if (!all && textures.empty()) {
                throw ringtex::ConfigError("pass --all or at least one --texture");
            }
            return cmd_simulate(config_path, textures, commands_dir, run_out);
        }
        if (ev->parsed()) return cmd_eval(trials_path, eval_out);
    } catch (const ringtex::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ringtex::IngestionError& e) {
        std::fprintf(stderr, "ingestion error: %s\n", e.what());
        return 3;
    } catch (const ringtex::RenderError& e) {
        std::fprintf(stderr, "render error: %s\n", e.what());
        return 4;
    } catch (const ringtex::PreparationTimeoutError& e) {
        std::fprintf(stderr, "simulation timeout: %s\n", e.what());
        return 5;
    } catch (const ringtex::StepSizeError& e) {
        // An unstable step size comes straight from the config file.
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ringtex::SchemaError& e) {
        std::fprintf(stderr, "schema error: %s\n", e.what());
        return 6;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
