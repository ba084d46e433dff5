#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "ecm_invade/diagnostics.hpp"
#include "ecm_invade/ic.hpp"

using namespace ecm_invade;

namespace {

const Grid unit = make_grid(1, 0.0, 1.0, 0.1);

double entropy_of_constant(double u, double m) {
    const Field uf(unit.size(), u), mf(unit.size(), m);
    return entropy(uf, mf, unit);
}

}  // namespace

TEST(Entropy, EmptyDomain) { EXPECT_NEAR(entropy_of_constant(0.0, 0.0), -1.0, 1e-14); }

TEST(Entropy, HalfFilledDomain) {
    EXPECT_NEAR(entropy_of_constant(0.5, 0.0), std::log(0.5) - 1.0, 1e-14);
    EXPECT_NEAR(entropy_of_constant(0.5, 0.0), -1.693147, 1e-6);
}

TEST(Entropy, FullEcmVanishes) { EXPECT_NEAR(entropy_of_constant(0.0, 1.0), 0.0, 1e-14); }

TEST(Entropy, ScalesWithMeasure) {
    const Grid g = make_grid(2, 0.0, 2.0, 0.25);
    const Field u(g.size(), 0.5), m(g.size(), 0.0);
    EXPECT_NEAR(entropy(u, m, g), 4.0 * (std::log(0.5) - 1.0), 1e-12);
}

TEST(Entropy, MinimisedAtHalfAmongConstantStates) {
    double best_u = -1.0, best = 1e300;
    for (int k = 1; k < 1000; ++k) {
        const double u = k / 1000.0;
        const double e = entropy_of_constant(u, 0.0);
        if (e < best) best = e, best_u = u;
    }
    EXPECT_NEAR(best_u, 0.5, 1e-3);
}

TEST(GradNormSq, ConstantIsZero) {
    EXPECT_EQ(grad_norm_sq(Field(unit.size(), 0.7), unit), 0.0);
}

TEST(GradNormSq, ExactOnLinearFields) {
    Field a(unit.size());
    for (std::size_t p = 0; p < a.size(); ++p) a[p] = unit.point(p).x;
    EXPECT_NEAR(grad_norm_sq(a, unit), 1.0, 1e-12);

    const Grid g = make_grid(2, 0.0, 1.0, 0.1);
    Field b(g.size());
    for (std::size_t p = 0; p < b.size(); ++p) b[p] = 2.0 * g.point(p).x - g.point(p).y;
    EXPECT_NEAR(grad_norm_sq(b, g), 5.0, 1e-12);
}

TEST(GradNormSq, SineOnFullPeriod) {
    const double two_pi = 2.0 * std::numbers::pi;
    const Grid g = make_grid(1, 0.0, two_pi, two_pi / 1000.0);
    Field a(g.size());
    for (std::size_t p = 0; p < a.size(); ++p) a[p] = std::sin(g.point(p).x);
    EXPECT_NEAR(grad_norm_sq(a, g), std::numbers::pi, 1e-3);
}

TEST(Mass, ConstantAndZero) {
    const Grid g = make_grid(1, 0.0, 10.0, 0.1);
    EXPECT_NEAR(mass(Field(g.size(), 0.5), g), 5.0, 1e-12);
    EXPECT_EQ(mass(Field(g.size(), 0.0), g), 0.0);
}

TEST(Mass, StepProfileNearUnitLength) {
    const Grid g = make_grid(1, 0.0, 200.0, 0.1);
    const double cells = mass(step_ic(g, ModelParams{}).u, g);
    // Points at x = 0, ..., 0.9 carry cells; the left end has half weight.
    EXPECT_NEAR(cells, 0.95, 1e-12);
}

TEST(L2Difference, IdenticalAndShifted) {
    const Grid g = make_grid(1, 0.0, 4.0, 0.1);
    const FieldPair a{Field(g.size(), 0.2), Field(g.size(), 0.3)};
    EXPECT_EQ(l2_difference(a, a, g), 0.0);
    const FieldPair b{Field(g.size(), 0.5), Field(g.size(), 0.7)};
    EXPECT_NEAR(l2_difference(a, b, g), std::sqrt(4.0 * (0.09 + 0.16)), 1e-12);
}

TEST(StateReport, BoxExtremaAndNaNEntropyTerms) {
    const Grid g = make_grid(1, 0.0, 1.0, 0.5);
    const FieldPair f{Field{0.1, 0.4, 0.0}, Field{0.2, 0.5, 0.3}};
    const EntropyReport r = state_report(2.0, f, g);
    EXPECT_EQ(r.time, 2.0);
    EXPECT_DOUBLE_EQ(r.min_u, 0.0);
    EXPECT_DOUBLE_EQ(r.min_m, 0.2);
    EXPECT_DOUBLE_EQ(r.max_rho, 0.9);
    EXPECT_TRUE(std::isnan(r.inequality_residual));
    EXPECT_TRUE(std::isnan(r.max_abs_w));
    EXPECT_GE(r.grad_u_sq, 0.0);
    EXPECT_GE(r.grad_m_sq, 0.0);
}
