#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ecm_invade/errors.hpp"
#include "ecm_invade/grid.hpp"
#include "ecm_invade/model.hpp"
#include "ecm_invade/rk.hpp"

namespace ecm_invade {

enum class Integrator { rk45_adaptive, rk4_fixed };

/// How the ECM ODE is carried through the Runge-Kutta stages.
///
/// direct:   the state is (u, m) and m' = -lambda m u is integrated as is.
/// exposure: the state is (u, phi) with phi' = u and m = m_in exp(-lambda phi).
///           Both describe the same solution; the exposure form removes the
///           -lambda u stiffness that makes large lambda intractable.
enum class EcmForm { direct, exposure };

struct ExplicitConfig {
    double t_end = 100.0;
    double snapshot_interval = 1.0;
    Integrator integrator = Integrator::rk45_adaptive;
    double dt_init = 1e-3;  ///< initial step (adaptive) or fixed step (rk4)
    double rel_tol = 1e-9;  ///< looser values let RK overshoot u + m = 1 by more than box_tol
    double abs_tol = 1e-12;
    double dt_max = 1.0;
    EcmForm ecm_form = EcmForm::exposure;
    double box_tol = 1e-8;  ///< allowed undershoot/overshoot before aborting

    void validate() const {
        if (!(t_end > 0.0)) throw ConfigError("t_end must be positive");
        if (!(snapshot_interval > 0.0)) throw ConfigError("snapshot_interval must be positive");
        if (snapshot_interval > t_end) throw ConfigError("snapshot_interval must not exceed t_end");
        if (!(dt_init > 0.0)) throw ConfigError("explicit.dt_init must be positive");
        if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw ConfigError("explicit tolerances must be positive");
        if (!(dt_max > 0.0)) throw ConfigError("explicit.dt_max must be positive");
        if (!(box_tol >= 0.0)) throw ConfigError("explicit.box_tol must be >= 0");
    }

    bool operator==(const ExplicitConfig&) const = default;
};

struct Snapshot {
    double time = 0.0;
    FieldPair fields;
};

struct ExplicitStats {
    std::size_t accepted_steps = 0;
    std::size_t rejected_steps = 0;
    std::size_t rhs_evaluations = 0;
    double max_accepted_error = 0.0;
    double min_dt = 0.0;
};

using SnapshotObserver = std::function<void(const Snapshot&)>;

/// Snapshot times k * interval up to t_end, plus t_end itself when it is not a multiple.
inline std::vector<double> snapshot_times(double t_end, double interval) {
    std::vector<double> times;
    const auto count = static_cast<std::size_t>(std::floor(t_end / interval + 1e-9));
    for (std::size_t k = 0; k <= count; ++k) times.push_back(static_cast<double>(k) * interval);
    if (t_end - times.back() > 1e-9 * interval) times.push_back(t_end);
    return times;
}

namespace detail {

/// Method-of-lines right-hand side on the stacked state [u, second] where
/// second is m (direct) or phi (exposure).
class MolSystem {
public:
    MolSystem(const Grid& grid, const ModelParams& params, EcmForm form, Field m_in)
        : grid_(grid), params_(params), form_(form), m_in_(std::move(m_in)),
          m_(grid.size()), rho_(grid.size()), free_(grid.size()) {}

    void operator()(double, std::span<const double> y, std::span<double> dydt) {
        const std::size_t n = grid_.size();
        const auto u = y.first(n);
        const auto second = y.subspan(n, n);
        ecm_from_state(second, m_);
        for (std::size_t p = 0; p < n; ++p) {
            rho_[p] = u[p] + m_[p];
            free_[p] = 1.0 - rho_[p];
        }
        auto du = dydt.first(n);
        auto ds = dydt.subspan(n, n);
        for (std::size_t p = 0; p < n; ++p) {
            du[p] = u[p] * free_[p];
            ds[p] = form_ == EcmForm::exposure ? u[p] : -params_.lambda * m_[p] * u[p];
        }
        const double c = 1.0 / (2.0 * grid_.spacing() * grid_.spacing());
        for_each_link(grid_, [&](std::size_t p, std::size_t q) {
            du[p] += c * ((free_[p] + free_[q]) * (u[q] - u[p]) + (u[p] + u[q]) * (rho_[q] - rho_[p]));
        });
    }

    void ecm_from_state(std::span<const double> second, std::span<double> m) const {
        if (form_ == EcmForm::direct) {
            std::copy(second.begin(), second.end(), m.begin());
        } else {
            for (std::size_t p = 0; p < m.size(); ++p) {
                m[p] = m_in_[p] == 0.0 ? 0.0 : m_in_[p] * std::exp(-params_.lambda * second[p]);
            }
        }
    }

    std::vector<double> pack(const FieldPair& f) const {
        std::vector<double> y(f.u);
        if (form_ == EcmForm::direct) y.insert(y.end(), f.m.begin(), f.m.end());
        else y.resize(2 * f.u.size(), 0.0);
        return y;
    }

    FieldPair unpack(const std::vector<double>& y) const {
        const std::size_t n = grid_.size();
        FieldPair f;
        f.u.assign(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n));
        f.m.resize(n);
        ecm_from_state(std::span<const double>(y).subspan(n, n), f.m);
        return f;
    }

private:
    const Grid& grid_;
    ModelParams params_;
    EcmForm form_;
    Field m_in_;
    Field m_, rho_, free_;
};

}  // namespace detail

/// Integrates the semi-discrete system from t = 0 to cfg.t_end, calling
/// observer at every snapshot time (t = 0 included). Steps are clamped to land
/// exactly on snapshot times.
inline ExplicitStats integrate(const FieldPair& fields0, const ModelParams& params, const Grid& grid,
                               const ExplicitConfig& cfg, const SnapshotObserver& observer) {
    cfg.validate();
    params.validate();
    grid.require_field(fields0.u, "u");
    grid.require_field(fields0.m, "m");
    check_box(fields0, cfg.box_tol, 0.0);

    detail::MolSystem sys(grid, params, cfg.ecm_form, fields0.m);
    std::vector<double> y = sys.pack(fields0);
    const std::size_t n = grid.size();

    ExplicitStats stats;
    stats.min_dt = cfg.dt_init;
    const auto times = snapshot_times(cfg.t_end, cfg.snapshot_interval);
    observer(Snapshot{0.0, fields0});

    auto check_state = [&](double t) {
        FieldPair f = sys.unpack(y);
        check_box(f, cfg.box_tol, t);
        return f;
    };

    double t = 0.0;
    if (cfg.integrator == Integrator::rk4_fixed) {
        ClassicalRk4<detail::MolSystem&> rk(sys, y.size());
        for (std::size_t k = 1; k < times.size(); ++k) {
            while (t < times[k]) {
                double dt = cfg.dt_init;
                if (t + dt >= times[k] - 1e-12 * cfg.dt_init) dt = times[k] - t;
                rk.step(t, y, dt);
                t = (dt == times[k] - t) ? times[k] : t + dt;
                ++stats.accepted_steps;
                stats.rhs_evaluations += 4;
                stats.min_dt = std::min(stats.min_dt, dt);
                for (std::size_t p = 0; p < n; ++p) {
                    if (y[p] < -cfg.box_tol) check_state(t);
                }
            }
            observer(Snapshot{t, check_state(t)});
        }
        return stats;
    }

    DormandPrince45<detail::MolSystem&> dp(sys, Tolerances{cfg.rel_tol, cfg.abs_tol}, y.size());
    double dt = std::min(cfg.dt_init, cfg.dt_max);
    for (std::size_t k = 1; k < times.size(); ++k) {
        const double target = times[k];
        while (t < target) {
            const double remaining = target - t;
            const bool clamped = dt >= remaining;
            const double h = clamped ? remaining : dt;
            const auto a = dp.attempt(t, y, h);
            if (a.accepted) {
                t = clamped ? target : t + h;
                ++stats.accepted_steps;
                stats.max_accepted_error = std::max(stats.max_accepted_error, a.error);
                stats.min_dt = std::min(stats.min_dt, h);
                // A clamped step says nothing about the natural step size.
                dt = std::min(clamped ? std::max(dt, a.dt_next) : a.dt_next, cfg.dt_max);
                for (std::size_t p = 0; p < n; ++p) {
                    if (y[p] < -cfg.box_tol || !(y[p] <= 1.0 + cfg.box_tol)) {
                        check_state(t);
                        break;
                    }
                }
            } else {
                ++stats.rejected_steps;
                dt = a.dt_next;
            }
            if (dt < 1e-12) {
                throw InstabilityError("adaptive step underflow (dt = " + std::to_string(dt) +
                                       ") at t = " + std::to_string(t));
            }
        }
        observer(Snapshot{t, check_state(t)});
    }
    stats.rhs_evaluations = dp.rhs_evaluations();
    return stats;
}

/// Convenience overload collecting every snapshot.
inline std::vector<Snapshot> integrate(const FieldPair& fields0, const ModelParams& params,
                                       const Grid& grid, const ExplicitConfig& cfg) {
    std::vector<Snapshot> out;
    integrate(fields0, params, grid, cfg, [&](const Snapshot& s) { out.push_back(s); });
    return out;
}

}  // namespace ecm_invade
