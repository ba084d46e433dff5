#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/SparseCholesky>
#include <gtest/gtest.h>

#include "ecm_invade/entropy_scheme.hpp"
#include "ecm_invade/ic.hpp"

using namespace ecm_invade;

namespace {

EntropyState regularised_state(const FieldPair& f, double tau) {
    Field m = regularize_initial_m(f.m, tau);
    Field u = regularize_initial_u(f.u, m, tau);
    return EntropyState{std::move(u), std::move(m), {}, tau, 0.0};
}

FieldPair smooth_fields(const Grid& g) {
    FieldPair f{Field(g.size()), Field(g.size())};
    for (std::size_t p = 0; p < g.size(); ++p) {
        const double x = g.point(p).x;
        f.u[p] = 0.3 + 0.1 * std::cos(x);
        f.m[p] = 0.3 + 0.1 * std::sin(x);
    }
    return f;
}

// Smooth data with zero normal derivative at both ends of [0, 10].
FieldPair neumann_fields(const Grid& g) {
    FieldPair f{Field(g.size()), Field(g.size())};
    for (std::size_t p = 0; p < g.size(); ++p) {
        const double x = g.point(p).x;
        f.u[p] = 0.3 + 0.1 * std::cos(std::numbers::pi * x / 10.0);
        f.m[p] = 0.3 + 0.1 * std::cos(std::numbers::pi * x / 5.0);
    }
    return f;
}

void expect_strict_bounds(const EntropyState& s) {
    for (std::size_t p = 0; p < s.u.size(); ++p) {
        EXPECT_GT(s.u[p], 0.0);
        EXPECT_GT(s.m[p], 0.0);
        EXPECT_LT(s.u[p] + s.m[p], 1.0);
    }
}

}  // namespace

TEST(Regularize, ClampsIntoOpenInterval) {
    const Field out = regularize_initial_m(Field{0.0, 0.5, 1.0}, 0.01);
    EXPECT_DOUBLE_EQ(out[0], 0.01);
    EXPECT_DOUBLE_EQ(out[1], 0.5);
    EXPECT_DOUBLE_EQ(out[2], 0.99);
    EXPECT_THROW(regularize_initial_m(Field{0.5}, 0.5), ConfigError);
}

TEST(Regularize, CellsLeaveFreeSpace) {
    const Field m = regularize_initial_m(Field{0.0, 0.5}, 0.01);
    const Field u = regularize_initial_u(Field{1.0, 0.2}, m, 0.01);
    EXPECT_LT(u[0] + m[0], 1.0);
    EXPECT_DOUBLE_EQ(u[1], 0.2);
}

TEST(EntropyVariable, PointExamples) {
    EXPECT_DOUBLE_EQ(entropy_variable(0.5, 0.0), 0.0);
    EXPECT_NEAR(entropy_variable(0.25, 0.25), -std::log(2.0), 1e-15);
    EXPECT_NEAR(entropy_variable(0.25, 0.25), -0.693147, 1e-6);
}

TEST(EntropyVariable, OutOfBoundsIsDomainError) {
    EXPECT_THROW(entropy_variable(Field{0.5, 0.0}, Field{0.1, 0.1}), DomainError);
    EXPECT_THROW(entropy_variable(Field{0.5, 0.6}, Field{0.1, 0.4}), DomainError);
}

TEST(UFromW, PointExamples) {
    EXPECT_DOUBLE_EQ(u_from_w(0.0, 0.0), 0.5);
    EXPECT_NEAR(u_from_w(50.0, 0.2), 0.8, 1e-12);
    const double tiny = u_from_w(-50.0, 0.0);
    EXPECT_GT(tiny, 0.0);
    EXPECT_LT(tiny, 1e-20);
}

namespace {

double worst_round_trip(double w_lo, double w_hi, int samples) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> wd(w_lo, w_hi), md(0.0, 0.999);
    double worst = 0.0;
    for (int k = 0; k < samples; ++k) {
        const double w = wd(rng), m = md(rng);
        worst = std::max(worst, std::abs(entropy_variable(u_from_w(w, m), m) - w));
    }
    return worst;
}

}  // namespace

TEST(UFromW, RoundTripModerateRange) { EXPECT_LT(worst_round_trip(-30.0, 5.0, 5000), 1e-10); }

TEST(UFromW, RoundTripFullRange) { EXPECT_LT(worst_round_trip(-30.0, 30.0, 5000), 1e-10); }

TEST(EcmFixedPoint, NoCellsKeepsEcm) {
    const Field m_prev{0.1, 0.5, 0.9};
    const auto r = solve_m_fixed_point(m_prev, Field(3, -800.0), 0.01, 10.0);
    for (std::size_t p = 0; p < 3; ++p) EXPECT_EQ(r.m[p], m_prev[p]);
}

TEST(EcmFixedPoint, QuadraticRoot) {
    const double closed = (1.1 - std::sqrt(1.21 - 0.2)) / 0.2;
    double brute = 0.5;
    for (int k = 0; k < 1000; ++k) brute = 0.5 / (1.0 + 0.1 * (1.0 - brute));
    const auto r = solve_m_fixed_point(Field{0.5}, Field{50.0}, 0.1, 1.0);
    EXPECT_NEAR(r.m[0], closed, 1e-11);
    EXPECT_NEAR(r.m[0], brute, 1e-11);
    EXPECT_NEAR(r.m[0], 0.475062, 1e-6);
}

TEST(EcmFixedPoint, ContractionFactorBounded) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> wd(-5.0, 5.0), md(0.01, 0.99);
    for (double tl : {0.1, 0.5, 0.9}) {
        Field w(200), m(200);
        for (std::size_t p = 0; p < w.size(); ++p) w[p] = wd(rng), m[p] = md(rng);
        const auto r = solve_m_fixed_point(m, w, tl, 1.0);
        EXPECT_LE(r.max_contraction, tl + 1e-3);
        for (std::size_t p = 0; p < w.size(); ++p) EXPECT_LE(r.m[p], m[p]);
    }
}

TEST(EcmFixedPoint, RequiresContraction) {
    EXPECT_THROW(solve_m_fixed_point(Field{0.5}, Field{0.0}, 0.5, 2.0), ConfigError);
}

TEST(EcmImplicitUpdate, GeometricDecay) {
    const Field m = ecm_implicit_update(Field{0.5}, Field{0.4}, 0.1, 2.0);
    EXPECT_DOUBLE_EQ(m[0], 0.5 / 1.08);
}

TEST(WLinear, ZeroDataGivesZero) {
    const Grid g = make_grid(1, 0.0, 2.0, 0.1);
    const Field u(g.size(), 0.0), m(g.size(), 0.5);
    for (double v : solve_w_linear(u, m, u, 0.01, g)) EXPECT_EQ(v, 0.0);
}

TEST(WLinear, ConstantDataGivesConstantSolution) {
    for (int dim : {1, 2}) {
        const Grid g = make_grid(dim, 0.0, 2.0, 0.1);
        const Field u(g.size(), 0.3), m(g.size(), 0.2);
        const double tau = 0.01;
        const double expected = 0.3 * (1.0 - 0.5) / tau;
        for (double v : solve_w_linear(u, m, u, tau, g)) EXPECT_NEAR(v, expected, 1e-8 * expected);
    }
}

TEST(WLinear, SystemIsSymmetricPositiveDefinite) {
    const Grid g = make_grid(2, 0.0, 1.0, 0.1);
    const FieldPair f = smooth_fields(make_grid(2, 0.0, 1.0, 0.1));
    const auto sys = assemble_w_system(f.u, f.m, f.u, 0.01, g);
    const SparseMatrix asym = sys.matrix - SparseMatrix(sys.matrix.transpose());
    EXPECT_LT(asym.norm(), 1e-12 * sys.matrix.norm());
    Eigen::SimplicialLLT<SparseMatrix> llt(sys.matrix);
    EXPECT_EQ(llt.info(), Eigen::Success);
}

TEST(WLinear, SolvesAssembledSystem) {
    const Grid g = make_grid(1, 0.0, 5.0, 0.1);
    const FieldPair f = smooth_fields(g);
    Field u_prev = f.u;
    for (double& v : u_prev) v *= 0.9;
    const Field w = solve_w_linear(f.u, f.m, u_prev, 0.01, g);
    const auto sys = assemble_w_system(f.u, f.m, u_prev, 0.01, g);
    const Eigen::Map<const Eigen::VectorXd> x(w.data(), static_cast<Eigen::Index>(w.size()));
    EXPECT_LT((sys.matrix * x - sys.rhs).norm(), 1e-10 * sys.rhs.norm());
}

TEST(WLinear, IterationCapIsLinearSolveError) {
    const Grid g = make_grid(1, 0.0, 5.0, 0.1);
    const FieldPair f = smooth_fields(g);
    Field u_prev = f.u;
    for (double& v : u_prev) v *= 0.5;
    EXPECT_THROW(solve_w_linear(f.u, f.m, u_prev, 0.01, g, 1e-14, 1), LinearSolveError);
}

TEST(SchemeConfig, ContractionCondition) {
    SchemeConfig c;
    c.tau = 0.01;
    EXPECT_NO_THROW(c.validate(99.0));
    EXPECT_THROW(c.validate(100.0), ConfigError);
}

TEST(ImplicitStep, NearSteadyStateMovesByOrderTau) {
    const Grid g = make_grid(1, 0.0, 5.0, 0.1);
    const double tau = 0.01;
    const EntropyState prev = regularised_state(FieldPair{Field(g.size(), 1.0), Field(g.size(), 0.0)}, tau);
    SchemeConfig cfg;
    cfg.tau = tau;
    const EntropyState next = implicit_step(prev, ModelParams{1.0, 0.5}, g, cfg);
    expect_strict_bounds(next);
    for (std::size_t p = 0; p < g.size(); ++p) EXPECT_LE(std::abs(next.u[p] - prev.u[p]), 10.0 * tau);
}

TEST(ImplicitStep, StructuralPropertiesFromStepData) {
    const Grid g = make_grid(1, 0.0, 20.0, 0.1);
    const ModelParams params{5.0, 0.5};
    SchemeConfig cfg;
    cfg.tau = 0.05;
    EntropyState s = regularised_state(step_ic(g, params), cfg.tau);
    for (int k = 0; k < 10; ++k) {
        const EntropyState next = implicit_step(s, params, g, cfg);
        expect_strict_bounds(next);
        const Field w = entropy_variable(next.u, next.m);
        for (std::size_t p = 0; p < g.size(); ++p) {
            EXPECT_LE(next.m[p], s.m[p]);
            EXPECT_LT(std::abs(next.m[p] * (1.0 + params.lambda * cfg.tau * next.u[p]) - s.m[p]),
                      10.0 * cfg.picard_tol);
            EXPECT_NEAR(next.w[p], w[p], 1e-8 * (1.0 + std::abs(w[p])));
        }
        s = next;
    }
}

TEST(ImplicitStep, ZeroRateLeavesEcmUntouched) {
    const Grid g = make_grid(1, 0.0, 10.0, 0.1);
    const ModelParams params{0.0, 0.5};
    SchemeConfig cfg;
    EntropyState s = regularised_state(step_ic(g, params), cfg.tau);
    const EntropyState next = implicit_step(s, params, g, cfg);
    for (std::size_t p = 0; p < g.size(); ++p) EXPECT_EQ(next.m[p], s.m[p]);
}

TEST(ImplicitStep, LocalErrorAgainstExplicitIsSecondOrder) {
    const Grid g = make_grid(1, 0.0, 10.0, 0.1);
    const ModelParams params{1.0, 0.5};
    const FieldPair f0 = neumann_fields(g);
    std::vector<double> diffs;
    for (double tau : {1e-2, 5e-3, 2.5e-3}) {
        SchemeConfig cfg;
        cfg.tau = tau;
        const EntropyState next = implicit_step(EntropyState{f0.u, f0.m, {}, tau, 0.0}, params, g, cfg);
        ExplicitConfig ec;
        ec.t_end = tau;
        ec.snapshot_interval = tau;
        const auto snaps = integrate(f0, params, g, ec);
        diffs.push_back(l2_difference(FieldPair{next.u, next.m}, snaps.back().fields, g));
    }
    for (std::size_t k = 0; k + 1 < diffs.size(); ++k) {
        EXPECT_GT(diffs[k] / diffs[k + 1], 3.0) << "tau ratio step " << k << ": " << diffs[k] << " vs " << diffs[k + 1];
    }
}

TEST(ImplicitStep, CapWithoutHalvingIsConvergenceError) {
    const Grid g = make_grid(1, 0.0, 10.0, 0.1);
    const ModelParams params{1.0, 0.5};
    SchemeConfig cfg;
    cfg.picard_max_iter = 1;
    cfg.max_tau_halvings = 0;
    EXPECT_THROW(run_entropy_scheme(step_ic(g, params), params, g, cfg, 0.1, 0.1, [](const Snapshot&) {}),
                 ConvergenceError);
}

TEST(EntropyReport, NoDynamicsHasZeroEntropyChange) {
    const Grid g = make_grid(1, 0.0, 5.0, 0.1);
    const FieldPair f = smooth_fields(g);
    const EntropyState s{f.u, f.m, entropy_variable(f.u, f.m), 0.01, 0.0};
    const EntropyReport r = entropy_step_report(s, s, 0.01, g);
    EXPECT_NEAR(r.inequality_residual, r.dissipation_tau + r.dissipation_mobility - g.measure(), 1e-12);
    EXPECT_GE(r.dissipation_tau, 0.0);
    EXPECT_GE(r.dissipation_mobility, 0.0);
}

TEST(EntropyReport, UniformHalfState) {
    const Grid g = make_grid(1, 0.0, 1.0, 0.1);
    const Field u(g.size(), 0.5), m(g.size(), 0.0);
    const EntropyState s{u, m, entropy_variable(u, m), 0.01, 0.0};
    EXPECT_NEAR(entropy_step_report(s, s, 0.01, g).entropy, std::log(0.5) - 1.0, 1e-12);
}

TEST(RunEntropyScheme, ShortRunKeepsStructure) {
    const Grid g = make_grid(1, 0.0, 20.0, 0.1);
    const ModelParams params{1.0, 0.5};
    SchemeConfig cfg;
    std::vector<Snapshot> snaps;
    std::size_t reports = 0;
    const auto st = run_entropy_scheme(
        step_ic(g, params), params, g, cfg, 1.0, 0.5, [&](const Snapshot& s) { snaps.push_back(s); },
        [&](const EntropyReport& r) {
            ++reports;
            EXPECT_GT(r.min_u, 0.0);
            EXPECT_GT(r.min_m, 0.0);
            EXPECT_LT(r.max_rho, 1.0);
        });
    ASSERT_EQ(snaps.size(), 3u);
    EXPECT_DOUBLE_EQ(snaps.back().time, 1.0);
    EXPECT_EQ(st.steps, 100u);
    EXPECT_EQ(reports, st.steps);
    EXPECT_LT(st.max_closed_form_residual, 10.0 * cfg.picard_tol);
    EXPECT_LE(st.max_contraction, cfg.tau * params.lambda + 1e-3);
    EXPECT_EQ(st.violations.size(), st.entropy_violations);
}

TEST(RunEntropyScheme, EntropyGrowthBoundedLinearly) {
    const Grid g = make_grid(1, 0.0, 20.0, 0.1);
    const ModelParams params{1.0, 0.5};
    SchemeConfig cfg;
    double e0 = 0.0, t0 = 0.0;
    bool first = true;
    run_entropy_scheme(step_ic(g, params), params, g, cfg, 2.0, 0.1, [](const Snapshot&) {},
                       [&](const EntropyReport& r) {
                           if (first) e0 = r.entropy, t0 = r.time, first = false;
                           EXPECT_LE(r.entropy - e0, 2.0 * g.measure() * (r.time - t0));
                       });
}
