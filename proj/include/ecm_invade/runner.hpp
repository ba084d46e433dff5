#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecm_invade/config.hpp"
#include "ecm_invade/diagnostics.hpp"
#include "ecm_invade/entropy_scheme.hpp"
#include "ecm_invade/errors.hpp"
#include "ecm_invade/explicit.hpp"
#include "ecm_invade/ic.hpp"
#include "ecm_invade/io.hpp"
#include "ecm_invade/waves.hpp"

namespace ecm_invade {

using Logger = std::function<void(const std::string&)>;

struct RunOptions {
    bool write_files = true;
    Logger log;                      ///< progress messages; may be empty
    SnapshotObserver on_snapshot;    ///< extra snapshot consumer; may be empty
    ReportObserver on_report;        ///< extra diagnostics consumer; may be empty
};

struct RunResult {
    std::string config_hash;
    WaveTrace trace;
    std::string fit_error;           ///< non-empty when the speed fit was impossible
    bool front_stationary = false;
    std::size_t snapshots = 0;
    FieldPair final_fields;
    nlohmann::json stats;
    std::string error;               ///< non-empty when the solver failed
    fs::path output_dir;

    bool ok() const { return error.empty(); }
};

/// True for errors raised by a solver during a run (as opposed to bad input).
inline bool is_solver_failure(const std::exception& e) {
    return dynamic_cast<const StabilityError*>(&e) || dynamic_cast<const InstabilityError*>(&e) ||
           dynamic_cast<const ConvergenceError*>(&e) || dynamic_cast<const LinearSolveError*>(&e) ||
           dynamic_cast<const DomainError*>(&e);
}

inline double track_front(const FieldPair& f, const Grid& g, double threshold) {
    return g.dim() == 1 ? front_position(f.u, g, threshold) : front_position_on_axis(f.u, g, threshold);
}

namespace detail {

inline void say(const Logger& log, const std::string& msg) {
    if (log) log(msg);
}

inline nlohmann::json trace_json(const WaveTrace& t, const std::string& fit_error) {
    nlohmann::json j{{"threshold", t.threshold},
                     {"times", t.times},
                     {"positions", t.front_positions},
                     {"fitted_speed", number_or_null(t.fitted_speed)},
                     {"fit_window", {t.fit_window[0], t.fit_window[1]}},
                     {"fit_residual", number_or_null(t.fit_residual)}};
    if (!fit_error.empty()) j["fit_error"] = fit_error;
    return j;
}

inline void finish_trace(RunResult& r, std::array<double, 2> window, double spacing) {
    WaveTrace& t = r.trace;
    t.fit_window = window;
    try {
        fit_trace(t, window);
    } catch (const Error& e) {
        t.fitted_speed = std::numeric_limits<double>::quiet_NaN();
        t.fit_residual = std::numeric_limits<double>::quiet_NaN();
        r.fit_error = e.what();
    }
    if (t.front_positions.empty()) {
        r.front_stationary = true;
    } else {
        const auto [lo, hi] = std::minmax_element(t.front_positions.begin(), t.front_positions.end());
        r.front_stationary = (*hi - *lo) <= 1e-6 * spacing;
    }
}

}  // namespace detail

/// Runs one simulation. With write_files set, out_dir receives the snapshots,
/// diagnostics.csv, config.yaml and summary.json. Solver failures are caught
/// and reported through RunResult::error; input errors propagate.
inline RunResult run_simulation(const RunConfig& cfg, const fs::path& out_dir, const RunOptions& opt = {}) {
    cfg.validate();
    const Grid g = cfg.grid.build();
    RunResult r;
    r.config_hash = config_hash(cfg);
    r.output_dir = out_dir;
    r.trace.threshold = cfg.front_threshold;

    std::optional<DiagnosticsWriter> diag;
    if (opt.write_files) {
        detail::ensure_directory(out_dir);
        detail::write_text_file(out_dir / "config.yaml", write_config(cfg));
        diag.emplace(out_dir / "diagnostics.csv");
    }

    const FieldPair f0 = make_initial_fields(g, cfg.model, cfg.ic);
    auto on_snapshot = [&](const Snapshot& s) {
        ++r.snapshots;
        if (opt.write_files) write_snapshot(s.fields, s.time, g, out_dir, cfg.snapshot_format);
        try {
            const double x = track_front(s.fields, g, cfg.front_threshold);
            r.trace.times.push_back(s.time);
            r.trace.front_positions.push_back(x);
        } catch (const FrontNotFoundError&) {
        }
        if (cfg.scheme == SchemeKind::explicit_rk) {
            const EntropyReport rep = state_report(s.time, s.fields, g);
            if (diag) diag->write(rep);
            if (opt.on_report) opt.on_report(rep);
        }
        if (opt.on_snapshot) opt.on_snapshot(s);
        if (s.time >= cfg.t_end - 1e-9 * cfg.snapshot_interval) r.final_fields = s.fields;
        const double every = std::max(cfg.snapshot_interval, cfg.t_end / 10.0);
        if (std::fmod(s.time + 1e-9, every) < 2e-9 || s.time == cfg.t_end) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "t = %.4g / %.4g", s.time, cfg.t_end);
            detail::say(opt.log, buf);
        }
    };

    try {
        if (cfg.scheme == SchemeKind::explicit_rk) {
            const ExplicitStats st = integrate(f0, cfg.model, g, cfg.explicit_run(), on_snapshot);
            r.stats = {{"accepted_steps", st.accepted_steps},
                       {"rejected_steps", st.rejected_steps},
                       {"rhs_evaluations", st.rhs_evaluations},
                       {"max_accepted_error", st.max_accepted_error},
                       {"min_dt", st.min_dt}};
        } else {
            auto on_report = [&](const EntropyReport& rep) {
                if (diag) diag->write(rep);
                if (opt.on_report) opt.on_report(rep);
            };
            const EntropyRunStats st =
                run_entropy_scheme(f0, cfg.model, g, cfg.entropy, cfg.t_end, cfg.snapshot_interval, on_snapshot, on_report);
            nlohmann::json violations = nlohmann::json::array();
            for (const auto& [t, v] : st.violations) violations.push_back({{"time", t}, {"residual", v}});
            r.stats = {{"steps", st.steps},
                       {"tau_halvings", st.tau_halvings},
                       {"max_outer_iterations", st.max_outer_iterations},
                       {"total_outer_iterations", st.total_outer_iterations},
                       {"max_closed_form_residual", st.max_closed_form_residual},
                       {"max_contraction", st.max_contraction},
                       {"entropy_violations", st.entropy_violations},
                       {"max_violation", st.max_violation},
                       {"violations", violations}};
        }
    } catch (const Error& e) {
        if (!is_solver_failure(e)) throw;
        r.error = e.what();
        detail::say(opt.log, std::string("solver failure: ") + e.what());
    }

    detail::finish_trace(r, cfg.fit_range(), g.spacing());
    if (opt.write_files) {
        nlohmann::json j{{"config_hash", r.config_hash},
                         {"scheme", to_string(cfg.scheme)},
                         {"lambda", cfg.model.lambda},
                         {"m0", cfg.model.m0},
                         {"t_end", cfg.t_end},
                         {"snapshots", r.snapshots},
                         {"front", detail::trace_json(r.trace, r.fit_error)},
                         {"analytic_speed", analytic_min_speed(cfg.model.m0)},
                         {"front_stationary", r.front_stationary},
                         {"stats", r.stats}};
        if (!r.ok()) j["error"] = r.error;
        write_json(j, out_dir / "summary.json");
    }
    return r;
}

/// Worker cap from ECM_INVADE_THREADS, else the hardware concurrency.
inline std::size_t thread_cap() {
    std::size_t cap = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("ECM_INVADE_THREADS"); env && *env) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (*end != '\0' || v < 1) throw ConfigError("ECM_INVADE_THREADS must be a positive integer, got '" + std::string(env) + "'");
        cap = static_cast<std::size_t>(v);
    }
    return cap;
}

/// Runs the base configuration once per lambda, up to `threads` at a time.
/// Member i writes into out_dir/lambda_<hash>; failures are recorded in the
/// returned records and do not stop the sweep. The summary is written to
/// out_dir/sweep_summary.json.
inline std::vector<SweepRecord> run_sweep(const RunConfig& base, std::span<const double> lambdas, const fs::path& out_dir,
                                          std::size_t threads = 1, const Logger& log = {}, bool write_files = true) {
    if (lambdas.empty()) throw ConfigError("sweep needs at least one lambda");
    std::vector<SweepRecord> records(lambdas.size());
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto locked_log = [&](const std::string& msg) {
        if (!log) return;
        std::lock_guard<std::mutex> lock(log_mutex);
        log(msg);
    };

    auto worker = [&] {
        for (std::size_t k; (k = next.fetch_add(1)) < lambdas.size();) {
            SweepRecord& rec = records[k];
            RunConfig cfg = base;
            cfg.model.lambda = lambdas[k];
            rec.lambda = lambdas[k];
            rec.m0 = cfg.model.m0;
            rec.analytic_speed = analytic_min_speed(cfg.model.m0);
            rec.window = cfg.fit_range();
            try {
                cfg.validate();
                const fs::path dir = out_dir / ("lambda_" + config_hash(cfg));
                locked_log("lambda = " + detail::fmt_double(lambdas[k]) + ": running");
                RunOptions opt;
                opt.write_files = write_files;
                const RunResult r = run_simulation(cfg, dir, opt);
                rec.fitted_speed = r.trace.fitted_speed;
                rec.residual = r.trace.fit_residual;
                if (!r.ok()) rec.error = r.error;
                else if (!r.fit_error.empty()) rec.error = r.fit_error;
            } catch (const std::exception& e) {
                rec.error = e.what();
            }
            char buf[160];
            std::snprintf(buf, sizeof buf, "lambda = %g: speed %.6g%s", rec.lambda, rec.fitted_speed,
                          rec.ok() ? "" : " (failed)");
            locked_log(buf);
        }
    };

    const std::size_t n_workers = std::clamp<std::size_t>(threads, 1, lambdas.size());
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < n_workers; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::stable_sort(records.begin(), records.end(),
                     [](const SweepRecord& a, const SweepRecord& b) { return a.lambda < b.lambda; });
    if (write_files) write_sweep_summary(records, out_dir / "sweep_summary.json");
    return records;
}

struct CrosscheckResult {
    double t_end = 0.0;
    std::vector<double> taus;
    std::vector<double> differences;  ///< discrete L2 distance explicit vs implicit at t_end
    std::vector<double> ratios;       ///< differences[k-1] / differences[k]
    bool monotone = false;
    bool passed = false;              ///< monotone and every ratio at least crosscheck_min_ratio
};

/// Smallest accepted reduction of the scheme difference per tau refinement.
inline constexpr double crosscheck_min_ratio = 1.3;

/// Discrete L2 distance between two runs of the same grid at one time.
inline double scheme_difference(const FieldPair& a, const FieldPair& b, const Grid& g) { return l2_difference(a, b, g); }

/// Runs both schemes from the configured initial data to crosscheck.t_end
/// and measures their distance for every tau in crosscheck.taus.
inline CrosscheckResult run_crosscheck(const RunConfig& cfg, const Logger& log = {}) {
    cfg.validate();
    if (cfg.crosscheck.taus.empty()) throw ConfigError("crosscheck.taus must not be empty");
    const Grid g = cfg.grid.build();
    const FieldPair f0 = make_initial_fields(g, cfg.model, cfg.ic);
    const double horizon = cfg.crosscheck.t_end;

    ExplicitConfig ec = cfg.explicit_cfg;
    ec.t_end = horizon;
    ec.snapshot_interval = horizon;
    FieldPair reference;
    integrate(f0, cfg.model, g, ec, [&](const Snapshot& s) { reference = s.fields; });
    detail::say(log, "explicit reference done");

    CrosscheckResult out;
    out.t_end = horizon;
    for (double tau : cfg.crosscheck.taus) {
        SchemeConfig sc = cfg.entropy;
        sc.tau = tau;
        sc.validate(cfg.model.lambda);
        FieldPair implicit_state;
        run_entropy_scheme(f0, cfg.model, g, sc, horizon, horizon, [&](const Snapshot& s) { implicit_state = s.fields; });
        out.taus.push_back(tau);
        out.differences.push_back(scheme_difference(reference, implicit_state, g));
        if (out.differences.size() > 1) {
            out.ratios.push_back(out.differences[out.differences.size() - 2] / out.differences.back());
        }
        char buf[128];
        std::snprintf(buf, sizeof buf, "tau = %g: L2 difference %.6g", tau, out.differences.back());
        detail::say(log, buf);
    }
    out.monotone = true;
    for (std::size_t k = 1; k < out.differences.size(); ++k) {
        if (!(out.differences[k] < out.differences[k - 1])) out.monotone = false;
    }
    out.passed = out.monotone;
    for (double r : out.ratios) {
        if (!(r >= crosscheck_min_ratio)) out.passed = false;
    }
    return out;
}

inline nlohmann::json to_json(const CrosscheckResult& r) {
    return {{"t_end", r.t_end}, {"taus", r.taus}, {"differences", r.differences}, {"ratios", r.ratios},
            {"monotone", r.monotone}, {"min_ratio", crosscheck_min_ratio}, {"passed", r.passed}};
}

/// Front trace and speed fit from the snapshot files in dir. An empty window
/// selects the last half of the recorded time span.
inline WaveTrace analyse_snapshots(const fs::path& dir, double threshold, std::span<const double> window = {}) {
    const auto files = list_snapshots(dir);
    if (files.empty()) throw IoError("no snapshot files in " + dir.string());
    WaveTrace trace;
    trace.threshold = threshold;
    double t_first = 0.0, t_last = 0.0;
    for (std::size_t k = 0; k < files.size(); ++k) {
        const SnapshotData d = read_snapshot(files[k]);
        if (k == 0) t_first = d.time;
        t_last = d.time;
        try {
            const double x = track_front(d.fields, d.grid, threshold);
            trace.times.push_back(d.time);
            trace.front_positions.push_back(x);
        } catch (const FrontNotFoundError&) {
        }
    }
    std::array<double, 2> w{t_first + 0.5 * (t_last - t_first), t_last};
    if (window.size() == 2) w = {window[0], window[1]};
    fit_trace(trace, w);
    return trace;
}

}  // namespace ecm_invade
