#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ecm_invade/ecm_invade.hpp"

namespace {

using namespace ecm_invade;

constexpr int exit_ok = 0;
constexpr int exit_solver = 1;
constexpr int exit_usage = 2;

struct CommonArgs {
    std::string config;
    std::vector<std::string> overrides;
    std::string out;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config, "configuration file (YAML)")->required();
    cmd->add_option("--set", args.overrides, "override one key, e.g. --set model.lambda=100")->take_all();
    cmd->add_option("--out", args.out, "output directory (overrides output_dir)");
    cmd->add_flag("--quiet", args.quiet, "suppress progress messages");
}

RunConfig load(const CommonArgs& args) {
    RunConfig cfg = load_config(args.config, args.overrides);
    if (!args.out.empty()) cfg.output_dir = args.out;
    return cfg;
}

Logger make_logger(const CommonArgs& args) {
    if (args.quiet) return {};
    return [](const std::string& msg) { std::cerr << "ecm-invade: " << msg << '\n'; };
}

void report_failure(const std::string& kind, const std::string& message) {
    const nlohmann::json j{{"error", kind}, {"message", message}};
    std::cerr << j.dump() << '\n';
}

int cmd_run(const CommonArgs& args) {
    const RunConfig cfg = load(args);
    RunOptions opt;
    opt.log = make_logger(args);
    const RunResult r = run_simulation(cfg, cfg.output_dir, opt);
    if (!r.ok()) {
        report_failure("solver", r.error);
        return exit_solver;
    }
    if (!args.quiet) {
        std::fprintf(stderr, "ecm-invade: %zu snapshots in %s; front speed %.6g (analytic %.6g)%s\n", r.snapshots,
                     cfg.output_dir.c_str(), r.trace.fitted_speed, analytic_min_speed(cfg.model.m0),
                     r.front_stationary ? "; front stationary" : "");
    }
    return exit_ok;
}

std::vector<double> parse_lambda_list(const std::string& text) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = std::min(text.find(',', start), text.size());
        const std::string item = text.substr(start, comma - start);
        if (item.empty()) {
            if (text.empty()) break;
            throw ConfigError("--lambdas has an empty entry in '" + text + "'");
        }
        char* end = nullptr;
        const double v = std::strtod(item.c_str(), &end);
        if (end != item.c_str() + item.size()) throw ConfigError("--lambdas: '" + item + "' is not a number");
        out.push_back(v);
        start = comma + 1;
    }
    return out;
}

int cmd_sweep(const CommonArgs& args, const std::string& lambdas_text, bool lambdas_given) {
    const RunConfig cfg = load(args);
    const std::vector<double> lambdas = lambdas_given ? parse_lambda_list(lambdas_text) : cfg.sweep.lambdas;
    if (lambdas.empty()) {
        report_failure("usage", "the lambda list is empty");
        return exit_usage;
    }
    const auto records = run_sweep(cfg, lambdas, cfg.output_dir, thread_cap(), make_logger(args));
    for (const auto& rec : records) {
        if (!rec.ok()) {
            report_failure("solver", "lambda = " + std::to_string(rec.lambda) + ": " + rec.error);
        }
    }
    for (const auto& rec : records) {
        if (!rec.ok()) return exit_solver;
    }
    return exit_ok;
}

int cmd_waves(const CommonArgs& args, const std::string& snapshots_dir) {
    const RunConfig cfg = load(args);
    const fs::path dir = snapshots_dir.empty() ? fs::path(cfg.output_dir) : fs::path(snapshots_dir);
    const WaveTrace trace = analyse_snapshots(dir, cfg.front_threshold, cfg.fit_window);
    const nlohmann::json j{{"threshold", trace.threshold},
                           {"times", trace.times},
                           {"positions", trace.front_positions},
                           {"fitted_speed", trace.fitted_speed},
                           {"fit_window", {trace.fit_window[0], trace.fit_window[1]}},
                           {"fit_residual", trace.fit_residual},
                           {"analytic_speed", analytic_min_speed(cfg.model.m0)}};
    const fs::path out = args.out.empty() ? dir / "waves.json" : fs::path(args.out) / "waves.json";
    write_json(j, out);
    if (!args.quiet) std::fprintf(stderr, "ecm-invade: front speed %.6g over [%g, %g]\n", trace.fitted_speed,
                                  trace.fit_window[0], trace.fit_window[1]);
    return exit_ok;
}

int cmd_crosscheck(const CommonArgs& args) {
    const RunConfig cfg = load(args);
    const CrosscheckResult r = run_crosscheck(cfg, make_logger(args));
    write_json(to_json(r), fs::path(cfg.output_dir) / "crosscheck.json");
    if (!args.quiet) {
        for (std::size_t k = 0; k < r.ratios.size(); ++k) {
            std::fprintf(stderr, "ecm-invade: ratio tau %g -> %g: %.4g\n", r.taus[k], r.taus[k + 1], r.ratios[k]);
        }
    }
    if (!r.passed) {
        report_failure("crosscheck", r.monotone ? "differences shrink by less than the required ratio per refinement"
                                                : "differences do not shrink monotonically as tau decreases");
        return exit_solver;
    }
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cell invasion into extracellular matrix: simulation and travelling-wave analysis", "ecm-invade"};
    app.require_subcommand(1);

    CommonArgs run_args, sweep_args, waves_args, cross_args;
    std::string lambdas;
    std::string snapshots_dir;

    auto* run = app.add_subcommand("run", "run one simulation");
    add_common(run, run_args);
    auto* sweep = app.add_subcommand("sweep", "run the configuration for several degradation rates");
    add_common(sweep, sweep_args);
    auto* lambdas_opt = sweep->add_option("--lambdas", lambdas, "comma-separated degradation rates, e.g. 1,100,1e4");
    auto* waves = app.add_subcommand("waves", "front trace and speed fit of existing snapshots");
    add_common(waves, waves_args);
    waves->add_option("--snapshots", snapshots_dir, "snapshot directory (default: output_dir)");
    auto* cross = app.add_subcommand("crosscheck", "compare the explicit and implicit schemes as tau shrinks");
    add_common(cross, cross_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        if (*run) return cmd_run(run_args);
        if (*sweep) return cmd_sweep(sweep_args, lambdas, lambdas_opt->count() > 0);
        if (*waves) return cmd_waves(waves_args, snapshots_dir);
        if (*cross) return cmd_crosscheck(cross_args);
    } catch (const ConfigError& e) {
        report_failure("config", e.what());
        return exit_usage;
    } catch (const std::exception& e) {
        report_failure(is_solver_failure(e) ? "solver" : "runtime", e.what());
        return exit_solver;
    }
    return exit_usage;
}
