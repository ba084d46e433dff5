#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ecm_invade/explicit.hpp"
#include "ecm_invade/ic.hpp"
#include "ecm_invade/waves.hpp"

using namespace ecm_invade;

TEST(FrontPosition, LinearInterpolation) {
    const Grid g = make_grid(1, 0.0, 0.3, 0.1);
    const double x = front_position(Field{1.0, 1.0, 0.05, 0.0}, g, 0.1);
    EXPECT_NEAR(x, 0.1 + 0.1 * (1.0 - 0.1) / (1.0 - 0.05), 1e-14);
    EXPECT_NEAR(x, 0.194737, 1e-6);
}

TEST(FrontPosition, NoCrossing) {
    const Grid g = make_grid(1, 0.0, 0.3, 0.1);
    EXPECT_THROW(front_position(Field(4, 1.0), g), FrontNotFoundError);
    EXPECT_THROW(front_position(Field(4, 0.0), g), FrontNotFoundError);
}

TEST(FrontPosition, ExactThresholdAtLatticePoint) {
    const Grid g = make_grid(1, 0.0, 0.3, 0.1);
    EXPECT_DOUBLE_EQ(front_position(Field{1.0, 0.1, 0.0, 0.0}, g, 0.1), 0.1);
}

TEST(FrontPosition, TranslationEquivariant) {
    const Grid g = make_grid(1, 0.0, 10.0, 0.1);
    Field u(g.size());
    for (std::size_t p = 0; p < u.size(); ++p) u[p] = 1.0 / (1.0 + std::exp(3.0 * (g.point(p).x - 2.0)));
    const double x0 = front_position(u, g);
    for (std::size_t k : {1u, 7u, 30u}) {
        Field shifted(g.size(), 1.0);
        for (std::size_t p = k; p < u.size(); ++p) shifted[p] = u[p - k];
        EXPECT_NEAR(front_position(shifted, g), x0 + static_cast<double>(k) * g.spacing(), 1e-12);
    }
}

TEST(FrontPosition, TwoDimensionalAxisAndRays) {
    const Grid g = make_grid(2, -5.0, 5.0, 0.1);
    Field u(g.size());
    for (std::size_t p = 0; p < u.size(); ++p) {
        const double r = std::hypot(g.point(p).x, g.point(p).y);
        u[p] = 1.0 / (1.0 + std::exp(4.0 * (r - 3.0)));
    }
    const double on_axis = front_position_on_axis(u, g);
    const double expected = 3.0 + std::log(9.0) / 4.0;
    EXPECT_NEAR(on_axis, expected, 5e-3);
    const RadialFronts rf = radial_fronts(u, g);
    EXPECT_EQ(rf.radii.size(), 64u);
    EXPECT_NEAR(rf.mean, expected, 1e-2);
    EXPECT_LT(rf.stddev, 1e-2);
}

TEST(EstimateSpeed, ExactLine) {
    std::vector<double> t, x;
    for (int k = 0; k <= 10; ++k) t.push_back(k), x.push_back(2.0 * k);
    const SpeedFit f = estimate_speed(t, x, {0.0, 10.0});
    EXPECT_NEAR(f.speed, 2.0, 1e-12);
    EXPECT_NEAR(f.residual, 0.0, 1e-12);
}

TEST(EstimateSpeed, NoisyLine) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> noise(-0.01, 0.01);
    std::vector<double> t, x;
    for (int k = 0; k < 50; ++k) t.push_back(k), x.push_back(1.414 * k + noise(rng));
    EXPECT_NEAR(estimate_speed(t, x, {0.0, 49.0}).speed, 1.414, 0.01);
}

TEST(EstimateSpeed, ConstantPositionAndShiftInvariance) {
    std::vector<double> t{0, 1, 2, 3, 4}, x{5, 5, 5, 5, 5};
    EXPECT_NEAR(estimate_speed(t, x, {0.0, 4.0}).speed, 0.0, 1e-14);
    std::vector<double> y{0.3, 1.9, 2.2, 3.8, 4.1}, y_shift;
    for (double v : y) y_shift.push_back(v + 17.0);
    EXPECT_NEAR(estimate_speed(t, y, {0.0, 4.0}).speed, estimate_speed(t, y_shift, {0.0, 4.0}).speed, 1e-12);
}

TEST(EstimateSpeed, WindowSelectsPoints) {
    std::vector<double> t{0, 1, 2, 3, 4, 5}, x{0, 10, 20, 21, 22, 23};
    EXPECT_NEAR(estimate_speed(t, x, {2.0, 5.0}).speed, 1.0, 1e-12);
    EXPECT_EQ(estimate_speed(t, x, {2.0, 5.0}).points, 4u);
}

TEST(EstimateSpeed, TooFewPoints) {
    std::vector<double> t{0, 1, 2}, x{0, 1, 2};
    EXPECT_THROW(estimate_speed(t, x, {1.0, 2.0}), InsufficientDataError);
}

TEST(AnalyticSpeed, Values) {
    EXPECT_DOUBLE_EQ(analytic_min_speed(0.0), 2.0);
    EXPECT_NEAR(analytic_min_speed(0.5), 1.414214, 1e-6);
    EXPECT_DOUBLE_EQ(analytic_min_speed(1.0), 0.0);
    EXPECT_THROW(analytic_min_speed(1.5), DomainError);
    EXPECT_THROW(analytic_min_speed(-0.1), DomainError);
}

TEST(OverlapWidth, SignedDistanceBetweenFronts) {
    const Grid g = make_grid(1, 0.0, 1.0, 0.1);
    Field u(g.size(), 0.0), m(g.size(), 0.5);
    for (std::size_t p = 0; p <= 5; ++p) u[p] = 1.0;
    for (std::size_t p = 0; p <= 3; ++p) m[p] = 0.0;
    // u crosses 0.1 between x = 0.5 and 0.6; m crosses 0.45 between x = 0.3 and 0.4.
    EXPECT_NEAR(front_overlap_width(u, m, g, 0.1, 0.45), (0.5 + 0.09) - (0.3 + 0.09), 1e-12);
}

TEST(SweepSpeeds, NonDecreasingAndWithinBand) {
    const Grid g = make_grid(1, 0.0, 200.0, 0.1);
    std::vector<double> speeds;
    for (double lambda : {1.0, 1e2, 1e4, 1e6}) {
        const ModelParams params{lambda, 0.5};
        ExplicitConfig c;
        c.t_end = 100.0;
        WaveTrace trace;
        integrate(step_ic(g, params), params, g, c, [&](const Snapshot& s) {
            trace.times.push_back(s.time);
            trace.front_positions.push_back(front_position(s.fields.u, g));
        });
        fit_trace(trace, default_fit_window(c.t_end));
        speeds.push_back(trace.fitted_speed);
    }
    for (std::size_t k = 0; k + 1 < speeds.size(); ++k) EXPECT_LE(speeds[k], speeds[k + 1]);
    const double lo = 2.0 * std::sqrt(0.5) - 0.1;
    for (double s : speeds) {
        EXPECT_GE(s, lo);
        EXPECT_LE(s, 2.0);
    }
}
