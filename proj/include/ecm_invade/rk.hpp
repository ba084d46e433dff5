#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "ecm_invade/errors.hpp"

namespace ecm_invade {

struct Tolerances {
    double rel_tol = 1e-6;
    double abs_tol = 1e-9;
};

/// Weighted RMS norm used for step acceptance; <= 1 means the step is accepted.
inline double weighted_rms(std::span<const double> err, std::span<const double> y0,
                           std::span<const double> y1, const Tolerances& tol) {
    double s = 0.0;
    for (std::size_t i = 0; i < err.size(); ++i) {
        const double scale = tol.abs_tol + tol.rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        const double r = err[i] / scale;
        s += r * r;
    }
    return err.empty() ? 0.0 : std::sqrt(s / static_cast<double>(err.size()));
}

/// Dormand-Prince 5(4) embedded pair with FSAL and a PI step-size controller.
///
/// Rhs is callable as rhs(t, y, dydt) with y a span<const double> and dydt a
/// span<double>. The fifth-order solution is propagated.
template <class Rhs>
class DormandPrince45 {
public:
    struct Attempt {
        bool accepted = false;
        double error = 0.0;    ///< weighted RMS of the embedded difference
        double dt_next = 0.0;  ///< proposed next step
    };

    DormandPrince45(Rhs rhs, Tolerances tol, std::size_t n)
        : rhs_(std::forward<Rhs>(rhs)), tol_(tol), y_new_(n), err_(n), tmp_(n) {
        for (auto& k : k_) k.resize(n);
    }

    const Tolerances& tolerances() const noexcept { return tol_; }

    /// One step attempt from (t, y). On acceptance y is overwritten with the
    /// new state; on rejection y is untouched.
    Attempt attempt(double t, std::vector<double>& y, double dt) {
        constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
        constexpr double a21 = 1.0 / 5;
        constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
        constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
        constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                         a54 = -212.0 / 729;
        constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                         a64 = 49.0 / 176, a65 = -5103.0 / 18656;
        constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                         b6 = 11.0 / 84;
        constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                         e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

        const std::size_t n = y.size();
        if (!fsal_valid_) {
            rhs_(t, std::span<const double>(y), std::span<double>(k_[0]));
            ++rhs_evals_;
            fsal_valid_ = true;
        }
        auto stage = [&](double ct, auto&& combine, std::vector<double>& k) {
            for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + dt * combine(i);
            rhs_(t + ct * dt, std::span<const double>(tmp_), std::span<double>(k));
            ++rhs_evals_;
        };
        auto& k1 = k_[0];
        auto& k2 = k_[1];
        auto& k3 = k_[2];
        auto& k4 = k_[3];
        auto& k5 = k_[4];
        auto& k6 = k_[5];
        auto& k7 = k_[6];
        stage(c2, [&](std::size_t i) { return a21 * k1[i]; }, k2);
        stage(c3, [&](std::size_t i) { return a31 * k1[i] + a32 * k2[i]; }, k3);
        stage(c4, [&](std::size_t i) { return a41 * k1[i] + a42 * k2[i] + a43 * k3[i]; }, k4);
        stage(c5, [&](std::size_t i) { return a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]; },
              k5);
        stage(1.0,
              [&](std::size_t i) {
                  return a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i];
              },
              k6);
        for (std::size_t i = 0; i < n; ++i) {
            y_new_[i] = y[i] + dt * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
        }
        rhs_(t + dt, std::span<const double>(y_new_), std::span<double>(k7));
        ++rhs_evals_;
        for (std::size_t i = 0; i < n; ++i) {
            err_[i] = dt * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
        }

        Attempt a;
        a.error = weighted_rms(err_, y, y_new_, tol_);
        if (!std::isfinite(a.error)) {
            throw InstabilityError("non-finite values in Runge-Kutta stage at t = " + std::to_string(t));
        }

        constexpr double beta = 0.04;
        constexpr double alpha = 0.2 - 0.75 * beta;
        constexpr double safety = 0.9;
        const double err = std::max(a.error, 1e-10);
        if (a.error <= 1.0) {
            double fac = safety * std::pow(err, -alpha) * std::pow(err_old_, beta);
            fac = std::clamp(fac, 0.2, rejected_last_ ? 1.0 : 10.0);
            a.dt_next = dt * fac;
            a.accepted = true;
            err_old_ = std::max(a.error, 1e-4);
            rejected_last_ = false;
            y.swap(y_new_);
            std::swap(k_[0], k_[6]);
        } else {
            const double fac = std::max(0.2, safety * std::pow(err, -alpha));
            a.dt_next = dt * fac;
            rejected_last_ = true;
        }
        return a;
    }

    /// Fifth-order candidate of the last rejected attempt.
    const std::vector<double>& candidate() const noexcept { return y_new_; }

    /// Must be called if y is modified outside attempt().
    void invalidate() noexcept { fsal_valid_ = false; }

    std::size_t rhs_evaluations() const noexcept { return rhs_evals_; }

private:
    Rhs rhs_;
    Tolerances tol_;
    std::vector<double> k_[7];
    std::vector<double> y_new_, err_, tmp_;
    bool fsal_valid_ = false;
    bool rejected_last_ = false;
    double err_old_ = 1e-4;
    std::size_t rhs_evals_ = 0;
};

struct Rk45Result {
    std::vector<double> state;
    double dt_next = 0.0;
    double error = 0.0;
    bool accepted = false;
};

/// Single embedded 5(4) step from a cold start. The returned state is the
/// fifth-order solution whether or not the step passes the tolerance test.
template <class Rhs>
Rk45Result rk45_step(std::vector<double> state, Rhs rhs, double dt, Tolerances tol) {
    if (!(dt > 0.0)) throw ConfigError("rk45_step requires dt > 0");
    DormandPrince45<Rhs> dp(std::forward<Rhs>(rhs), tol, state.size());
    auto a = dp.attempt(0.0, state, dt);
    Rk45Result r;
    r.error = a.error;
    r.dt_next = a.dt_next;
    r.accepted = a.accepted;
    r.state = a.accepted ? std::move(state) : dp.candidate();
    return r;
}

/// Classical fixed-step RK4.
template <class Rhs>
class ClassicalRk4 {
public:
    ClassicalRk4(Rhs rhs, std::size_t n) : rhs_(std::forward<Rhs>(rhs)), tmp_(n) {
        for (auto& k : k_) k.resize(n);
    }

    void step(double t, std::vector<double>& y, double dt) {
        const std::size_t n = y.size();
        rhs_(t, std::span<const double>(y), std::span<double>(k_[0]));
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + 0.5 * dt * k_[0][i];
        rhs_(t + 0.5 * dt, std::span<const double>(tmp_), std::span<double>(k_[1]));
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + 0.5 * dt * k_[1][i];
        rhs_(t + 0.5 * dt, std::span<const double>(tmp_), std::span<double>(k_[2]));
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + dt * k_[2][i];
        rhs_(t + dt, std::span<const double>(tmp_), std::span<double>(k_[3]));
        for (std::size_t i = 0; i < n; ++i) {
            y[i] += dt / 6.0 * (k_[0][i] + 2.0 * k_[1][i] + 2.0 * k_[2][i] + k_[3][i]);
            if (!std::isfinite(y[i])) {
                throw InstabilityError("non-finite state after RK4 step at t = " + std::to_string(t));
            }
        }
    }

private:
    Rhs rhs_;
    std::vector<double> k_[4];
    std::vector<double> tmp_;
};

}  // namespace ecm_invade
