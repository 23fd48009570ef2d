#include "sdot/cli_io.hpp"
#include "sdot/scenarios.hpp"

#include "CLI11.hpp"

#include <cstdint>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<double> tol;
    std::string out;
    bool force = false;
};

void add_common(CLI::App* cmd, Common& c, bool with_seed) {
    cmd->add_option("config", c.config, "JSON config file")->required()->check(CLI::ExistingFile);
    if (with_seed) cmd->add_option("--seed", c.seed, "Override the config seed");
    cmd->add_option("--tol", c.tol, "Override the solver tolerance");
    cmd->add_option("--out", c.out, "Output directory (default: the config output_dir)");
    cmd->add_flag("--force", c.force, "Overwrite an existing run");
}

sdot::ScenarioConfig load_scenario(const Common& c) {
    sdot::ScenarioConfig cfg = sdot::parse_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (c.tol) {
        if (!(*c.tol > 0.0)) sdot::fail(sdot::ErrorKind::config, "--tol must be positive");
        cfg.tol = *c.tol;
    }
    if (!c.out.empty()) cfg.output_dir = c.out;
    return cfg;
}

void report_written(const sdot::RunManifest& m, const std::string& dir) {
    std::cout << "wrote " << m.files.size() << " files to " << dir << "\n";
}

void run_scenario_reports(const Common& c, const std::function<std::vector<sdot::RegularityReport>(const sdot::ScenarioConfig&)>& run) {
    const sdot::ScenarioConfig cfg = load_scenario(c);
    const auto reports = run(cfg);
    report_written(sdot::write_outputs(reports, cfg, cfg.output_dir, c.force), cfg.output_dir);
}

bool is_sweep(sdot::ScenarioKind k) {
    return k == sdot::ScenarioKind::delta_sweep || k == sdot::ScenarioKind::two_component || k == sdot::ScenarioKind::partial_transport;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semi-discrete optimal transport and Monge-Ampere regularity laboratory"};
    app.require_subcommand(1);
    app.set_version_flag("--version", sdot::kArtifactVersion);

    Common solve_opts, ma_opts, probe_opts, run_opts, sweep_opts;
    auto* solve = app.add_subcommand("solve", "Solve the semi-discrete transport problem of a config");
    add_common(solve, solve_opts, true);
    auto* ma = app.add_subcommand("ma-dirichlet", "Solve det D^2 w = 1 with polynomial boundary data");
    add_common(ma, ma_opts, false);
    auto* probe = app.add_subcommand("probe", "Solve and run the regularity probes");
    add_common(probe, probe_opts, true);
    auto* scenario = app.add_subcommand("scenario", "Run a named scenario");
    scenario->require_subcommand(1);
    auto* run = scenario->add_subcommand("run", "Run any scenario kind");
    add_common(run, run_opts, true);
    auto* sweep = scenario->add_subcommand("sweep", "Run a sweep scenario (delta_sweep, two_component, partial_transport)");
    add_common(sweep, sweep_opts, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*solve) {
            run_scenario_reports(solve_opts, [](const sdot::ScenarioConfig& cfg) { return std::vector{sdot::run_solve(cfg)}; });
        } else if (*ma) {
            sdot::MaConfig cfg = sdot::parse_ma_config(ma_opts.config);
            if (ma_opts.tol) {
                if (!(*ma_opts.tol > 0.0)) sdot::fail(sdot::ErrorKind::config, "--tol must be positive");
                cfg.tol = *ma_opts.tol;
            }
            if (!ma_opts.out.empty()) cfg.output_dir = ma_opts.out;
            const auto m = sdot::write_outputs({sdot::run_ma_dirichlet(cfg)}, sdot::to_json(cfg), {}, cfg.output_dir, ma_opts.force);
            report_written(m, cfg.output_dir);
        } else if (*probe) {
            run_scenario_reports(probe_opts, [](const sdot::ScenarioConfig& cfg) { return std::vector{sdot::run_probe(cfg)}; });
        } else if (*run) {
            run_scenario_reports(run_opts, [](const sdot::ScenarioConfig& cfg) { return sdot::run_scenario(cfg); });
        } else if (*sweep) {
            run_scenario_reports(sweep_opts, [](const sdot::ScenarioConfig& cfg) {
                if (!is_sweep(cfg.kind))
                    sdot::fail(sdot::ErrorKind::parameter, "scenario sweep needs a sweep kind, got " + sdot::to_string(cfg.kind));
                return sdot::run_scenario(cfg);
            });
        }
    } catch (const sdot::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return sdot::exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
