#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "ecm_invade/entropy_scheme.hpp"
#include "ecm_invade/errors.hpp"
#include "ecm_invade/explicit.hpp"
#include "ecm_invade/grid.hpp"
#include "ecm_invade/ic.hpp"
#include "ecm_invade/model.hpp"

namespace ecm_invade {

struct GridSpec {
    int dim = 1;
    double x_min = 0.0;
    double x_max = 200.0;
    double spacing = 0.1;

    Grid build() const { return make_grid(dim, x_min, x_max, spacing); }
    bool operator==(const GridSpec&) const = default;
};

enum class SchemeKind { explicit_rk, entropy };
enum class SnapshotFormat { csv, binary };

struct CrosscheckSpec {
    double t_end = 5.0;
    std::vector<double> taus{1e-2, 5e-3, 2.5e-3};

    bool operator==(const CrosscheckSpec&) const = default;
};

struct SweepSpec {
    std::vector<double> lambdas{1.0, 1e2, 1e4, 1e6};

    bool operator==(const SweepSpec&) const = default;
};

struct RunConfig {
    SchemeKind scheme = SchemeKind::explicit_rk;
    double t_end = 100.0;
    double snapshot_interval = 1.0;
    std::string output_dir = "out";
    SnapshotFormat snapshot_format = SnapshotFormat::csv;
    double front_threshold = 0.1;
    std::vector<double> fit_window;  ///< empty selects the last half of [0, t_end]
    GridSpec grid;
    ModelParams model;
    IcSpec ic;
    ExplicitConfig explicit_cfg;
    SchemeConfig entropy;
    CrosscheckSpec crosscheck;
    SweepSpec sweep;

    /// Explicit settings with the run horizon filled in.
    ExplicitConfig explicit_run() const {
        ExplicitConfig c = explicit_cfg;
        c.t_end = t_end;
        c.snapshot_interval = snapshot_interval;
        return c;
    }

    std::array<double, 2> fit_range() const {
        if (fit_window.empty()) return {0.5 * t_end, t_end};
        return {fit_window[0], fit_window[1]};
    }

    void validate() const {
        if (!(t_end > 0.0)) throw ConfigError("t_end must be positive");
        if (!(snapshot_interval > 0.0)) throw ConfigError("snapshot_interval must be positive");
        if (snapshot_interval > t_end) throw ConfigError("snapshot_interval must not exceed t_end");
        if (!(front_threshold > 0.0 && front_threshold < 1.0)) throw ConfigError("front_threshold must lie in (0, 1)");
        if (!fit_window.empty() && (fit_window.size() != 2 || !(fit_window[0] < fit_window[1]))) {
            throw ConfigError("fit_window must be [t_lo, t_hi] with t_lo < t_hi");
        }
        if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
        (void)grid.build();
        model.validate();
        explicit_run().validate();
        if (scheme == SchemeKind::entropy) entropy.validate(model.lambda);
        if (!(ic.sigma > 0.0)) throw ConfigError("ic.sigma must be positive");
        if (ic.kind == IcKind::sinusoidal && grid.dim != 1) throw ConfigError("ic.kind sinusoidal needs grid.dim = 1");
        if (!(crosscheck.t_end > 0.0)) throw ConfigError("crosscheck.t_end must be positive");
        for (double tau : crosscheck.taus) {
            if (!(tau > 0.0)) throw ConfigError("crosscheck.taus must be positive");
        }
        for (double l : sweep.lambdas) {
            if (!(l >= 0.0)) throw ConfigError("sweep.lambdas must be >= 0");
        }
    }

    bool operator==(const RunConfig&) const = default;
};

inline std::string to_string(SchemeKind s) { return s == SchemeKind::entropy ? "entropy" : "explicit"; }
inline std::string to_string(SnapshotFormat f) { return f == SnapshotFormat::binary ? "binary" : "csv"; }
inline std::string to_string(Integrator i) { return i == Integrator::rk4_fixed ? "rk4_fixed" : "rk45_adaptive"; }
inline std::string to_string(EcmForm f) { return f == EcmForm::direct ? "direct" : "exposure"; }
inline std::string to_string(IcKind k) {
    switch (k) {
        case IcKind::random_gaussian: return "random_gaussian";
        case IcKind::sinusoidal: return "sinusoidal";
        default: return "step";
    }
}

namespace detail {

inline std::size_t line_of(const YAML::Node& n) { return static_cast<std::size_t>(n.Mark().line + 1); }

class Reader {
public:
    Reader(const YAML::Node& map, std::string prefix) : map_(map), prefix_(std::move(prefix)) {
        if (!map_.IsMap()) throw ParseError(line_of(map_), qualified("") + " must be a mapping");
    }

    template <class T>
    void get(const std::string& key, T& out) {
        seen_.insert(key);
        const YAML::Node n = map_[key];
        if (!n) return;
        try {
            out = n.as<T>();
        } catch (const YAML::Exception&) {
            throw ParseError(line_of(n), qualified(key) + ": cannot read value '" + scalar_of(n) + "'");
        }
    }

    template <class E>
    void choice(const std::string& key, E& out, std::initializer_list<std::pair<const char*, E>> options) {
        std::string text;
        get(key, text);
        if (text.empty()) return;
        for (const auto& [name, value] : options) {
            if (text == name) {
                out = value;
                return;
            }
        }
        std::string allowed;
        for (const auto& [name, value] : options) allowed += (allowed.empty() ? "" : ", ") + std::string(name);
        throw ParseError(line_of(map_[key]), qualified(key) + ": '" + text + "' is not one of " + allowed);
    }

    YAML::Node section(const std::string& key) {
        seen_.insert(key);
        return map_[key];
    }

    void reject_unknown() const {
        for (const auto& kv : map_) {
            const auto key = kv.first.as<std::string>();
            if (!seen_.count(key)) throw ParseError(line_of(kv.first), "unknown key '" + qualified(key) + "'");
        }
    }

private:
    std::string qualified(const std::string& key) const {
        if (prefix_.empty()) return key.empty() ? "configuration" : key;
        return key.empty() ? prefix_ : prefix_ + "." + key;
    }
    static std::string scalar_of(const YAML::Node& n) { return n.IsScalar() ? n.Scalar() : "<non-scalar>"; }

    const YAML::Node& map_;
    std::string prefix_;
    std::set<std::string> seen_;
};

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fmt_list(std::span<const double> v) {
    std::string s = "[";
    for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ", " : "") + fmt_double(v[k]);
    return s + "]";
}

}  // namespace detail

/// Builds a validated RunConfig from a parsed YAML document.
inline RunConfig config_from_yaml(const YAML::Node& root) {
    RunConfig c;
    if (!root || root.IsNull()) {
        c.validate();
        return c;
    }
    detail::Reader top(root, "");
    top.choice("scheme", c.scheme, {{"explicit", SchemeKind::explicit_rk}, {"entropy", SchemeKind::entropy}});
    top.get("t_end", c.t_end);
    top.get("snapshot_interval", c.snapshot_interval);
    top.get("output_dir", c.output_dir);
    top.choice("snapshot_format", c.snapshot_format, {{"csv", SnapshotFormat::csv}, {"binary", SnapshotFormat::binary}});
    top.get("front_threshold", c.front_threshold);
    top.get("fit_window", c.fit_window);

    if (auto n = top.section("grid")) {
        detail::Reader r(n, "grid");
        r.get("dim", c.grid.dim);
        r.get("x_min", c.grid.x_min);
        r.get("x_max", c.grid.x_max);
        r.get("spacing", c.grid.spacing);
        r.reject_unknown();
    }
    if (auto n = top.section("model")) {
        detail::Reader r(n, "model");
        r.get("lambda", c.model.lambda);
        r.get("m0", c.model.m0);
        r.reject_unknown();
    }
    if (auto n = top.section("ic")) {
        detail::Reader r(n, "ic");
        r.choice("kind", c.ic.kind,
                 {{"step", IcKind::step}, {"random_gaussian", IcKind::random_gaussian}, {"sinusoidal", IcKind::sinusoidal}});
        r.get("sigma", c.ic.sigma);
        r.get("seed", c.ic.seed);
        r.reject_unknown();
    }
    if (auto n = top.section("explicit")) {
        detail::Reader r(n, "explicit");
        r.choice("integrator", c.explicit_cfg.integrator,
                 {{"rk45_adaptive", Integrator::rk45_adaptive}, {"rk4_fixed", Integrator::rk4_fixed}});
        r.get("dt_init", c.explicit_cfg.dt_init);
        r.get("rel_tol", c.explicit_cfg.rel_tol);
        r.get("abs_tol", c.explicit_cfg.abs_tol);
        r.get("dt_max", c.explicit_cfg.dt_max);
        r.choice("ecm_form", c.explicit_cfg.ecm_form, {{"exposure", EcmForm::exposure}, {"direct", EcmForm::direct}});
        r.get("box_tol", c.explicit_cfg.box_tol);
        r.reject_unknown();
    }
    if (auto n = top.section("entropy")) {
        detail::Reader r(n, "entropy");
        r.get("tau", c.entropy.tau);
        r.get("picard_tol", c.entropy.picard_tol);
        r.get("picard_max_iter", c.entropy.picard_max_iter);
        r.get("inner_m_tol", c.entropy.inner_m_tol);
        r.get("inner_m_max_iter", c.entropy.inner_m_max_iter);
        r.get("linear_solver_tol", c.entropy.linear_solver_tol);
        r.get("linear_max_iter", c.entropy.linear_max_iter);
        r.get("damping", c.entropy.damping);
        r.get("max_tau_halvings", c.entropy.max_tau_halvings);
        r.reject_unknown();
    }
    if (auto n = top.section("crosscheck")) {
        detail::Reader r(n, "crosscheck");
        r.get("t_end", c.crosscheck.t_end);
        r.get("taus", c.crosscheck.taus);
        r.reject_unknown();
    }
    if (auto n = top.section("sweep")) {
        detail::Reader r(n, "sweep");
        r.get("lambdas", c.sweep.lambdas);
        r.reject_unknown();
    }
    top.reject_unknown();
    c.validate();
    return c;
}

inline YAML::Node parse_yaml(std::string_view text) {
    try {
        return YAML::Load(std::string(text));
    } catch (const YAML::ParserException& e) {
        throw ParseError(static_cast<std::size_t>(e.mark.line + 1), e.msg);
    }
}

/// Applies a "section.key=value" (or "key=value") override to a parsed document.
/// The value is read as YAML, so lists use flow syntax: sweep.lambdas=[1,100].
inline void apply_override(YAML::Node& root, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw ConfigError("override '" + std::string(assignment) + "' must look like section.key=value");
    }
    const std::string path(assignment.substr(0, eq));
    const std::string value(assignment.substr(eq + 1));
    YAML::Node parsed;
    try {
        parsed = YAML::Load(value);
    } catch (const YAML::Exception&) {
        throw ConfigError("override '" + path + "': cannot parse value '" + value + "'");
    }
    if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
    const auto dot = path.find('.');
    if (dot == std::string::npos) {
        root[path] = parsed;
        return;
    }
    const std::string section = path.substr(0, dot);
    const std::string key = path.substr(dot + 1);
    if (section.empty() || key.empty() || key.find('.') != std::string::npos) {
        throw ConfigError("override key '" + path + "' must be key or section.key");
    }
    YAML::Node sec = root[section];
    if (!sec || sec.IsNull()) {
        root[section] = YAML::Node(YAML::NodeType::Map);
        sec = root[section];
    }
    sec[key] = parsed;
}

inline RunConfig parse_config(std::string_view text, std::span<const std::string> overrides = {}) {
    YAML::Node root = parse_yaml(text);
    for (const auto& o : overrides) apply_override(root, o);
    return config_from_yaml(root);
}

inline RunConfig load_config(const std::filesystem::path& path, std::span<const std::string> overrides = {}) {
    std::string text;
    {
        std::FILE* f = std::fopen(path.c_str(), "rb");
        if (!f) throw ConfigError("cannot open config file " + path.string());
        char buf[4096];
        std::size_t got;
        while ((got = std::fread(buf, 1, sizeof buf, f)) > 0) text.append(buf, got);
        std::fclose(f);
    }
    return parse_config(text, overrides);
}

/// Canonical text rendering; load_config of this text reproduces the config.
inline std::string write_config(const RunConfig& c) {
    using detail::fmt_double;
    using detail::fmt_list;
    std::string s;
    auto line = [&s](const std::string& k, const std::string& v, int indent = 0) {
        s += std::string(static_cast<std::size_t>(indent), ' ') + k + ": " + v + "\n";
    };
    line("scheme", to_string(c.scheme));
    line("t_end", fmt_double(c.t_end));
    line("snapshot_interval", fmt_double(c.snapshot_interval));
    line("output_dir", "\"" + c.output_dir + "\"");
    line("snapshot_format", to_string(c.snapshot_format));
    line("front_threshold", fmt_double(c.front_threshold));
    if (!c.fit_window.empty()) line("fit_window", fmt_list(c.fit_window));
    s += "grid:\n";
    line("dim", std::to_string(c.grid.dim), 2);
    line("x_min", fmt_double(c.grid.x_min), 2);
    line("x_max", fmt_double(c.grid.x_max), 2);
    line("spacing", fmt_double(c.grid.spacing), 2);
    s += "model:\n";
    line("lambda", fmt_double(c.model.lambda), 2);
    line("m0", fmt_double(c.model.m0), 2);
    s += "ic:\n";
    line("kind", to_string(c.ic.kind), 2);
    line("sigma", fmt_double(c.ic.sigma), 2);
    line("seed", std::to_string(c.ic.seed), 2);
    s += "explicit:\n";
    line("integrator", to_string(c.explicit_cfg.integrator), 2);
    line("dt_init", fmt_double(c.explicit_cfg.dt_init), 2);
    line("rel_tol", fmt_double(c.explicit_cfg.rel_tol), 2);
    line("abs_tol", fmt_double(c.explicit_cfg.abs_tol), 2);
    line("dt_max", fmt_double(c.explicit_cfg.dt_max), 2);
    line("ecm_form", to_string(c.explicit_cfg.ecm_form), 2);
    line("box_tol", fmt_double(c.explicit_cfg.box_tol), 2);
    s += "entropy:\n";
    line("tau", fmt_double(c.entropy.tau), 2);
    line("picard_tol", fmt_double(c.entropy.picard_tol), 2);
    line("picard_max_iter", std::to_string(c.entropy.picard_max_iter), 2);
    line("inner_m_tol", fmt_double(c.entropy.inner_m_tol), 2);
    line("inner_m_max_iter", std::to_string(c.entropy.inner_m_max_iter), 2);
    line("linear_solver_tol", fmt_double(c.entropy.linear_solver_tol), 2);
    line("linear_max_iter", std::to_string(c.entropy.linear_max_iter), 2);
    line("damping", fmt_double(c.entropy.damping), 2);
    line("max_tau_halvings", std::to_string(c.entropy.max_tau_halvings), 2);
    s += "crosscheck:\n";
    line("t_end", fmt_double(c.crosscheck.t_end), 2);
    line("taus", fmt_list(c.crosscheck.taus), 2);
    s += "sweep:\n";
    line("lambdas", fmt_list(c.sweep.lambdas), 2);
    return s;
}

/// 16 hex digits of FNV-1a over the canonical rendering, output_dir excluded.
inline std::string config_hash(const RunConfig& c) {
    RunConfig keyed = c;
    keyed.output_dir = "-";
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : write_config(keyed)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace ecm_invade
