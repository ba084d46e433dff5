#pragma once

// Structure-preserving implicit Euler scheme in the entropy variable
//   w = log u - log(1 - u - m).
//
// Per step of size tau the scheme looks for (u_k, m_k, w_k) with
//   (u_k - u_{k-1})/tau = tau (lap w_k - w_k) + div(u_k (1-rho_k) grad w_k) + u_k (1-rho_k)
//   (m_k - m_{k-1})/tau = -lambda m_k u_k
//   u_k = (1 - m_k) / (1 + exp(-w_k))
// Because u and m are recovered from w through a logistic map and a
// contraction, 0 < u, 0 < m and u + m < 1 hold for every converged step.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "ecm_invade/diagnostics.hpp"
#include "ecm_invade/errors.hpp"
#include "ecm_invade/explicit.hpp"
#include "ecm_invade/grid.hpp"
#include "ecm_invade/model.hpp"

namespace ecm_invade {

struct SchemeConfig {
    double tau = 0.01;
    double picard_tol = 1e-10;     ///< sup-norm change of (u, m) between outer iterates
    int picard_max_iter = 200;
    double inner_m_tol = 1e-12;
    int inner_m_max_iter = 200;
    double linear_solver_tol = 1e-11;
    int linear_max_iter = 0;       ///< 0 selects max(1000, 10 n)
    double damping = 1.0;          ///< initial outer damping; halved while the residual grows
    int max_tau_halvings = 5;

    void validate(double lambda) const {
        if (!(tau > 0.0)) throw ConfigError("entropy.tau must be positive");
        if (!(tau < 0.5)) throw ConfigError("entropy.tau must be < 1/2 for the regularised initial ECM");
        if (!(tau * lambda < 1.0)) {
            throw ConfigError("entropy.tau * model.lambda = " + std::to_string(tau * lambda) +
                              " violates the contraction condition tau * lambda < 1");
        }
        if (!(picard_tol > 0.0) || !(inner_m_tol > 0.0) || !(linear_solver_tol > 0.0)) {
            throw ConfigError("entropy tolerances must be positive");
        }
        if (picard_max_iter < 1 || inner_m_max_iter < 1 || linear_max_iter < 0) {
            throw ConfigError("entropy iteration caps must be positive");
        }
        if (!(damping > 0.0 && damping <= 1.0)) throw ConfigError("entropy.damping must lie in (0, 1]");
        if (max_tau_halvings < 0) throw ConfigError("entropy.max_tau_halvings must be >= 0");
    }

    bool operator==(const SchemeConfig&) const = default;
};

struct EntropyState {
    Field u;
    Field m;
    Field w;  ///< empty until the first implicit step
    double tau = 0.0;
    double time = 0.0;
};

/// m_0 := max(tau, min(m_in, 1 - tau)) pointwise.
inline Field regularize_initial_m(std::span<const double> m_in, double tau) {
    if (!(tau > 0.0 && tau < 0.5)) throw ConfigError("regularisation requires 0 < tau < 1/2");
    Field out(m_in.begin(), m_in.end());
    for (double& v : out) v = std::max(tau, std::min(v, 1.0 - tau));
    return out;
}

/// u_0 := min(u_in, (1 - m_0)(1 - tau)) pointwise, so that the regularised
/// initial state keeps free space of at least tau (1 - m_0).
inline Field regularize_initial_u(std::span<const double> u_in, std::span<const double> m0, double tau) {
    if (!(tau > 0.0 && tau < 0.5)) throw ConfigError("regularisation requires 0 < tau < 1/2");
    if (u_in.size() != m0.size()) throw ShapeError("u and m differ in size");
    Field out(u_in.begin(), u_in.end());
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = std::min(out[p], (1.0 - m0[p]) * (1.0 - tau));
    return out;
}

/// Logistic 1/(1+exp(-w)) evaluated without overflow.
inline double logistic(double w) {
    if (w <= 0.0) {
        const double e = std::exp(w);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(-w));
}

inline double entropy_variable(double u, double m) {
    return std::log(u) - std::log(1.0 - u - m);
}

/// w = log u - log(1-u-m); throws DomainError unless 0 < u and u + m < 1.
inline Field entropy_variable(std::span<const double> u, std::span<const double> m) {
    if (u.size() != m.size()) throw ShapeError("u and m differ in size");
    Field w(u.size());
    for (std::size_t p = 0; p < u.size(); ++p) {
        if (!(u[p] > 0.0) || !(u[p] + m[p] < 1.0)) {
            throw DomainError("entropy variable undefined at point " + std::to_string(p) + " (u = " +
                              std::to_string(u[p]) + ", u + m = " + std::to_string(u[p] + m[p]) + ")");
        }
        w[p] = entropy_variable(u[p], m[p]);
    }
    return w;
}

inline double u_from_w(double w, double m) { return (1.0 - m) * logistic(w); }

inline Field u_from_w(std::span<const double> w, std::span<const double> m) {
    if (w.size() != m.size()) throw ShapeError("w and m differ in size");
    Field u(w.size());
    for (std::size_t p = 0; p < w.size(); ++p) u[p] = u_from_w(w[p], m[p]);
    return u;
}

/// Implicit ECM step with u frozen: m_prev / (1 + lambda tau u).
inline Field ecm_implicit_update(std::span<const double> m_prev, std::span<const double> u, double tau,
                                 double lambda) {
    if (u.size() != m_prev.size()) throw ShapeError("u and m differ in size");
    Field m(m_prev.size());
    for (std::size_t p = 0; p < m.size(); ++p) m[p] = m_prev[p] / (1.0 + lambda * tau * u[p]);
    return m;
}

// ---------------------------------------------------------------------------
// Inner ECM contraction
// ---------------------------------------------------------------------------

struct EcmFixedPoint {
    Field m;
    int iterations = 0;
    double max_contraction = 0.0;  ///< largest observed ratio of successive sup-norm updates
};

/// Solves (m - m_prev)/tau = -lambda a_w m (1 - m), a_w = logistic(w), by
/// iterating z <- m_prev / (1 + tau lambda a_w (1 - z)) from z = m_prev.
inline EcmFixedPoint solve_m_fixed_point(std::span<const double> m_prev, std::span<const double> w,
                                         double tau, double lambda, double tol = 1e-12,
                                         int max_iter = 200) {
    if (m_prev.size() != w.size()) throw ShapeError("m_prev and w differ in size");
    if (!(tau * lambda < 1.0)) throw ConfigError("ECM contraction requires tau * lambda < 1");
    const std::size_t n = w.size();
    Field rate(n);
    for (std::size_t p = 0; p < n; ++p) rate[p] = tau * lambda * logistic(w[p]);

    EcmFixedPoint r;
    r.m.assign(m_prev.begin(), m_prev.end());
    double last_change = 0.0;
    for (int it = 1; it <= max_iter; ++it) {
        double change = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            const double next = m_prev[p] / (1.0 + rate[p] * (1.0 - r.m[p]));
            change = std::max(change, std::abs(next - r.m[p]));
            r.m[p] = next;
        }
        if (it > 1 && last_change > 0.0) r.max_contraction = std::max(r.max_contraction, change / last_change);
        last_change = change;
        r.iterations = it;
        if (change < tol) return r;
    }
    throw ConvergenceError("ECM fixed-point iteration did not converge in " + std::to_string(max_iter) +
                               " iterations",
                           last_change);
}

// ---------------------------------------------------------------------------
// Linear elliptic problem for w
// ---------------------------------------------------------------------------

using SparseMatrix = Eigen::SparseMatrix<double>;

struct LinearSystem {
    SparseMatrix matrix;
    Eigen::VectorXd rhs;
};

/// Lumped weak form of
///   -div((tau + M) grad w) + tau w = M - (u~ - u_prev)/tau,   M = u~(1 - u~ - m~),
/// on the mirrored centred stencil. Rows are scaled by the trapezoidal
/// weights, which makes the matrix symmetric positive definite.
inline LinearSystem assemble_w_system(std::span<const double> u_tilde, std::span<const double> m_tilde,
                                      std::span<const double> u_prev, double tau, const Grid& g) {
    g.require_field(u_tilde, "u_tilde");
    g.require_field(m_tilde, "m_tilde");
    g.require_field(u_prev, "u_prev");
    if (!(tau > 0.0)) throw ConfigError("tau must be positive");
    const std::size_t n = g.size();
    Field D(n), weight(n);
    LinearSystem sys;
    sys.rhs.resize(static_cast<Eigen::Index>(n));
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(n * (2 * static_cast<std::size_t>(g.dim()) + 1) * 2);
    for (std::size_t p = 0; p < n; ++p) {
        const double mobility = u_tilde[p] * (1.0 - u_tilde[p] - m_tilde[p]);
        D[p] = tau + mobility;
        weight[p] = g.weight(p);
        sys.rhs[static_cast<Eigen::Index>(p)] = weight[p] * (mobility - (u_tilde[p] - u_prev[p]) / tau);
        trip.emplace_back(p, p, weight[p] * tau);
    }
    const double c = 1.0 / (2.0 * g.spacing() * g.spacing());
    for_each_link(g, [&](std::size_t p, std::size_t q) {
        const double k = weight[p] * c * (D[p] + D[q]);
        trip.emplace_back(p, p, k);
        trip.emplace_back(p, q, -k);
    });
    sys.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    sys.matrix.setFromTriplets(trip.begin(), trip.end());
    sys.matrix.makeCompressed();
    return sys;
}

struct CgResult {
    Eigen::VectorXd x;
    int iterations = 0;
    double relative_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradients. Throws LinearSolveError when
/// ||r|| / ||b|| >= tol after max_iter iterations.
inline CgResult conjugate_gradient(const SparseMatrix& A, const Eigen::VectorXd& b, Eigen::VectorXd x0,
                                   double tol, int max_iter) {
    CgResult res;
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        res.x = Eigen::VectorXd::Zero(b.size());
        return res;
    }
    const Eigen::VectorXd inv_diag = A.diagonal().cwiseInverse();
    Eigen::VectorXd x = x0.size() == b.size() ? std::move(x0) : Eigen::VectorXd::Zero(b.size());
    Eigen::VectorXd r = b - A * x;
    Eigen::VectorXd z = inv_diag.cwiseProduct(r);
    Eigen::VectorXd d = z;
    double rz = r.dot(z);
    double rel = r.norm() / bnorm;
    int it = 0;
    while (rel >= tol && it < max_iter) {
        const Eigen::VectorXd Ad = A * d;
        const double alpha = rz / d.dot(Ad);
        x += alpha * d;
        r -= alpha * Ad;
        z = inv_diag.cwiseProduct(r);
        const double rz_next = r.dot(z);
        d = z + (rz_next / rz) * d;
        rz = rz_next;
        rel = r.norm() / bnorm;
        ++it;
    }
    if (!(rel < tol)) {
        throw LinearSolveError("conjugate gradients stopped after " + std::to_string(it) +
                                   " iterations with relative residual " + std::to_string(rel),
                               rel);
    }
    res.x = std::move(x);
    res.iterations = it;
    res.relative_residual = rel;
    return res;
}

/// Solves the linear entropy-variable problem for frozen (u~, m~).
inline Field solve_w_linear(std::span<const double> u_tilde, std::span<const double> m_tilde,
                            std::span<const double> u_prev, double tau, const Grid& g,
                            double tol = 1e-11, int max_iter = 0) {
    const auto sys = assemble_w_system(u_tilde, m_tilde, u_prev, tau, g);
    const int cap = max_iter > 0 ? max_iter : std::max(1000, 10 * static_cast<int>(g.size()));
    const auto cg = conjugate_gradient(sys.matrix, sys.rhs, {}, tol, cap);
    return Field(cg.x.data(), cg.x.data() + cg.x.size());
}

// ---------------------------------------------------------------------------
// One implicit step
// ---------------------------------------------------------------------------

struct ImplicitStepStats {
    int outer_iterations = 0;
    double last_change = 0.0;     ///< final sup-norm change of (u, m)
    double min_damping = 1.0;
    int inner_m_iterations = 0;   ///< total ECM contraction sweeps
    double max_contraction = 0.0;
};

namespace detail {

/// Pointwise (u, m) and their w-derivatives at the current iterate.
struct PointwiseState {
    Field u, m, free_space, mobility, du, dmobility;
};

inline void evaluate_pointwise(std::span<const double> w, std::span<const double> m_prev, double tau,
                               double lambda, const SchemeConfig& cfg, PointwiseState& s,
                               ImplicitStepStats& stats) {
    const std::size_t n = w.size();
    auto fp = solve_m_fixed_point(m_prev, w, tau, lambda, cfg.inner_m_tol, cfg.inner_m_max_iter);
    stats.inner_m_iterations += fp.iterations;
    stats.max_contraction = std::max(stats.max_contraction, fp.max_contraction);
    s.m = std::move(fp.m);
    s.u.resize(n);
    s.free_space.resize(n);
    s.mobility.resize(n);
    s.du.resize(n);
    s.dmobility.resize(n);
    const double tl = tau * lambda;
    for (std::size_t p = 0; p < n; ++p) {
        const double a = logistic(w[p]);
        const double one_minus_a = logistic(-w[p]);
        const double da = a * one_minus_a;
        const double m = s.m[p];
        const double u = (1.0 - m) * a;
        const double dm = -m * tl * (1.0 - m) * da / (1.0 + tl * a * (1.0 - 2.0 * m));
        const double du = (1.0 - m) * da - a * dm;
        s.u[p] = u;
        s.free_space[p] = (1.0 - m) * one_minus_a;
        s.mobility[p] = u * s.free_space[p];
        s.du[p] = du;
        s.dmobility[p] = du * (1.0 - 2.0 * u - m) - u * dm;
    }
}

/// F(w) = (u - u_prev)/tau + tau w - M - div_h((tau + M) grad_h w).
inline void residual(std::span<const double> w, std::span<const double> u_prev, double tau,
                     const PointwiseState& s, const Grid& g, Field& F) {
    const std::size_t n = w.size();
    F.resize(n);
    for (std::size_t p = 0; p < n; ++p) {
        F[p] = (s.u[p] - u_prev[p]) / tau + tau * w[p] - s.mobility[p];
    }
    const double c = 1.0 / (2.0 * g.spacing() * g.spacing());
    for_each_link(g, [&](std::size_t p, std::size_t q) {
        F[p] -= c * (2.0 * tau + s.mobility[p] + s.mobility[q]) * (w[q] - w[p]);
    });
}

inline double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

/// Initial outer iterate when no previous w exists: w of u_prev pushed strictly inside the box.
inline Field initial_w_guess(std::span<const double> u_prev, std::span<const double> m_prev, double tau) {
    Field w(u_prev.size());
    for (std::size_t p = 0; p < w.size(); ++p) {
        const double hi = (1.0 - m_prev[p]) * (1.0 - tau);
        const double u = std::clamp(u_prev[p], tau * tau, hi);
        w[p] = std::log(u) - std::log((1.0 - m_prev[p]) - u);
    }
    return w;
}

}  // namespace detail

/// Advances one implicit Euler step of size cfg.tau.
///
/// The fixed point (u_k, m_k) = S2(S1(u_k, m_k)) is computed by a damped
/// Newton iteration on w with (u, m) eliminated pointwise; S1 and S2 are
/// exactly solve_w_linear and solve_m_fixed_point + u_from_w, so a converged
/// state is a fixed point of their composition. Throws ConvergenceError when
/// the outer iteration cap is reached.
inline EntropyState implicit_step(const EntropyState& prev, const ModelParams& params, const Grid& g,
                                  const SchemeConfig& cfg, ImplicitStepStats* stats_out = nullptr) {
    const double tau = cfg.tau;
    cfg.validate(params.lambda);
    g.require_field(prev.u, "u_prev");
    g.require_field(prev.m, "m_prev");
    const std::size_t n = g.size();
    const double c = 1.0 / (2.0 * g.spacing() * g.spacing());

    ImplicitStepStats stats;
    Field w = prev.w.size() == n ? prev.w : detail::initial_w_guess(prev.u, prev.m, tau);
    detail::PointwiseState s, trial;
    detail::evaluate_pointwise(w, prev.m, tau, params.lambda, cfg, s, stats);
    Field F, F_trial, w_trial(n);
    detail::residual(w, prev.u, tau, s, g, F);
    double fnorm = detail::norm2(F);

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(n * (4 * static_cast<std::size_t>(g.dim()) + 1));
    SparseMatrix J(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
    bool pattern_ready = false;
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));

    for (int it = 1; it <= cfg.picard_max_iter; ++it) {
        trip.clear();
        for (std::size_t p = 0; p < n; ++p) {
            trip.emplace_back(p, p, s.du[p] / tau + tau - s.dmobility[p]);
        }
        for_each_link(g, [&](std::size_t p, std::size_t q) {
            const double coupling = 2.0 * tau + s.mobility[p] + s.mobility[q];
            const double dw = w[q] - w[p];
            trip.emplace_back(p, p, -c * (s.dmobility[p] * dw - coupling));
            trip.emplace_back(p, q, -c * (s.dmobility[q] * dw + coupling));
        });
        J.setFromTriplets(trip.begin(), trip.end());
        if (!pattern_ready) {
            lu.analyzePattern(J);
            pattern_ready = true;
        }
        lu.factorize(J);
        if (lu.info() != Eigen::Success) {
            throw ConvergenceError("singular Jacobian in implicit step", fnorm);
        }
        for (std::size_t p = 0; p < n; ++p) rhs[static_cast<Eigen::Index>(p)] = -F[p];
        const Eigen::VectorXd delta = lu.solve(rhs);
        double full_step_change = 0.0;  // linearised change of u for an undamped step
        for (std::size_t p = 0; p < n; ++p) {
            full_step_change = std::max(full_step_change, std::abs(s.du[p] * delta[static_cast<Eigen::Index>(p)]));
        }

        double theta = cfg.damping;
        double fnorm_trial = 0.0;
        while (true) {
            for (std::size_t p = 0; p < n; ++p) w_trial[p] = w[p] + theta * delta[static_cast<Eigen::Index>(p)];
            detail::evaluate_pointwise(w_trial, prev.m, tau, params.lambda, cfg, trial, stats);
            detail::residual(w_trial, prev.u, tau, trial, g, F_trial);
            fnorm_trial = detail::norm2(F_trial);
            if (std::isfinite(fnorm_trial) && (fnorm_trial <= (1.0 - 1e-4 * theta) * fnorm || theta < 1e-3)) break;
            theta *= 0.5;
        }
        stats.min_damping = std::min(stats.min_damping, theta);

        double change = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            change = std::max({change, std::abs(trial.u[p] - s.u[p]), std::abs(trial.m[p] - s.m[p])});
        }
        w.swap(w_trial);
        std::swap(s, trial);
        F.swap(F_trial);
        fnorm = fnorm_trial;
        stats.outer_iterations = it;
        stats.last_change = change;
        if (change < cfg.picard_tol && (theta >= 1e-3 || full_step_change < cfg.picard_tol)) {
            EntropyState next{std::move(s.u), std::move(s.m), std::move(w), tau, prev.time + tau};
            for (std::size_t p = 0; p < n; ++p) {
                if (!(next.u[p] > 0.0) || !(next.m[p] > 0.0 || prev.m[p] == 0.0) ||
                    !(s.free_space[p] > 0.0 && next.u[p] + next.m[p] < 1.0)) {
                    throw StabilityError("strict bounds violated at point " + std::to_string(p) +
                                             " after implicit step to t = " + std::to_string(next.time),
                                         p, next.time);
                }
            }
            if (stats_out) *stats_out = stats;
            return next;
        }
    }
    throw ConvergenceError("implicit step did not converge in " + std::to_string(cfg.picard_max_iter) +
                               " outer iterations",
                           stats.last_change);
}

/// Diagnostics of one implicit step, including the discrete entropy inequality residual
///   R = (E_k - E_{k-1})/tau + tau int(|grad w_k|^2 + w_k^2) + int u_k(1-rho_k)|grad w_k|^2 - C |Omega|.
inline EntropyReport entropy_step_report(const EntropyState& prev, const EntropyState& next, double tau,
                                         const Grid& g, double C = 1.0) {
    g.require_field(next.w, "w");
    EntropyReport r = state_report(next.time, FieldPair{next.u, next.m}, g);
    const double e_prev = entropy(prev.u, prev.m, g);
    const Field grad_w = gradient_sq_field(next.w, g);
    double tau_part = 0.0;
    double mobility_part = 0.0;
    double max_abs_w = 0.0;
    for (std::size_t p = 0; p < g.size(); ++p) {
        const double wt = g.weight(p);
        const double w = next.w[p];
        tau_part += wt * (grad_w[p] + w * w);
        mobility_part += wt * next.u[p] * (1.0 - next.u[p] - next.m[p]) * grad_w[p];
        max_abs_w = std::max(max_abs_w, std::abs(w));
    }
    r.dissipation_tau = tau * tau_part;
    r.dissipation_mobility = mobility_part;
    r.inequality_residual =
        (r.entropy - e_prev) / tau + r.dissipation_tau + r.dissipation_mobility - C * g.measure();
    r.max_abs_w = max_abs_w;
    return r;
}

// ---------------------------------------------------------------------------
// Time integration
// ---------------------------------------------------------------------------

struct EntropyRunStats {
    std::size_t steps = 0;
    std::size_t tau_halvings = 0;
    int max_outer_iterations = 0;
    std::size_t total_outer_iterations = 0;
    double max_closed_form_residual = 0.0;  ///< max ||m_k (1 + lambda tau u_k) - m_{k-1}||_inf
    double max_contraction = 0.0;
    std::size_t entropy_violations = 0;     ///< steps with R > 0
    double max_violation = 0.0;
    std::vector<std::pair<double, double>> violations;  ///< (time, R) of every step with R > 0
};

using ReportObserver = std::function<void(const EntropyReport&)>;

namespace detail {

inline EntropyState step_with_retries(const EntropyState& prev, const ModelParams& params, const Grid& g,
                                      SchemeConfig cfg, int depth, EntropyRunStats& run,
                                      const std::function<void(const EntropyState&, const EntropyState&,
                                                               const ImplicitStepStats&)>& on_step) {
    ImplicitStepStats st;
    try {
        EntropyState next = implicit_step(prev, params, g, cfg, &st);
        on_step(prev, next, st);
        return next;
    } catch (const ConvergenceError&) {
        if (depth >= cfg.max_tau_halvings) throw;
    } catch (const LinearSolveError&) {
        if (depth >= cfg.max_tau_halvings) throw;
    }
    ++run.tau_halvings;
    cfg.tau *= 0.5;
    EntropyState mid = step_with_retries(prev, params, g, cfg, depth + 1, run, on_step);
    return step_with_retries(mid, params, g, cfg, depth + 1, run, on_step);
}

}  // namespace detail

/// Runs the implicit scheme from the initial data to t_end. The ECM initial
/// datum is regularised into [tau, 1 - tau]. Snapshots (t = 0 included) go to
/// `observer`; one EntropyReport per accepted step goes to `reports`.
inline EntropyRunStats run_entropy_scheme(const FieldPair& fields0, const ModelParams& params,
                                          const Grid& g, const SchemeConfig& cfg, double t_end,
                                          double snapshot_interval, const SnapshotObserver& observer,
                                          const ReportObserver& reports = {}) {
    params.validate();
    cfg.validate(params.lambda);
    if (!(t_end > 0.0) || !(snapshot_interval > 0.0)) throw ConfigError("t_end and snapshot_interval must be positive");
    g.require_field(fields0.u, "u");
    g.require_field(fields0.m, "m");

    Field m0 = regularize_initial_m(fields0.m, cfg.tau);
    Field u0 = regularize_initial_u(fields0.u, m0, cfg.tau);
    EntropyState state{std::move(u0), std::move(m0), {}, cfg.tau, 0.0};
    EntropyRunStats run;
    observer(Snapshot{0.0, fields0});

    auto on_step = [&](const EntropyState& prev, const EntropyState& next, const ImplicitStepStats& st) {
        ++run.steps;
        run.max_outer_iterations = std::max(run.max_outer_iterations, st.outer_iterations);
        run.total_outer_iterations += static_cast<std::size_t>(st.outer_iterations);
        run.max_contraction = std::max(run.max_contraction, st.max_contraction);
        for (std::size_t p = 0; p < g.size(); ++p) {
            const double r = std::abs(next.m[p] * (1.0 + params.lambda * next.tau * next.u[p]) - prev.m[p]);
            run.max_closed_form_residual = std::max(run.max_closed_form_residual, r);
        }
        const EntropyReport rep = entropy_step_report(prev, next, next.tau, g);
        if (rep.inequality_residual > 0.0) {
            ++run.entropy_violations;
            run.max_violation = std::max(run.max_violation, rep.inequality_residual);
            run.violations.emplace_back(rep.time, rep.inequality_residual);
        }
        if (reports) reports(rep);
    };

    const auto times = snapshot_times(t_end, snapshot_interval);
    for (std::size_t k = 1; k < times.size(); ++k) {
        const double target = times[k];
        while (state.time < target) {
            SchemeConfig step_cfg = cfg;
            double t_next = state.time + cfg.tau;
            if (t_next > target - 1e-9 * cfg.tau) t_next = target;
            step_cfg.tau = t_next - state.time;
            state = detail::step_with_retries(state, params, g, step_cfg, 0, run, on_step);
            state.time = t_next;
        }
        observer(Snapshot{state.time, FieldPair{state.u, state.m}});
    }
    return run;
}

}  // namespace ecm_invade
