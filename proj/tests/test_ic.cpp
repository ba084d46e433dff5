#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "ecm_invade/ic.hpp"

using namespace ecm_invade;

namespace {

std::size_t nearest_index(const Grid& g, double x, double y = 0.0) {
    std::size_t best = 0;
    double d = 1e300;
    for (std::size_t p = 0; p < g.size(); ++p) {
        const double e = std::hypot(g.point(p).x - x, g.point(p).y - y);
        if (e < d) d = e, best = p;
    }
    return best;
}

void expect_admissible(const FieldPair& f) {
    for (std::size_t p = 0; p < f.u.size(); ++p) {
        EXPECT_GE(f.u[p], 0.0);
        EXPECT_GE(f.m[p], 0.0);
        EXPECT_LE(f.u[p] + f.m[p], 1.0);
    }
}

}  // namespace

TEST(StepIc, OneDimensionalValues) {
    const Grid g = make_grid(1, 0.0, 200.0, 0.1);
    const FieldPair f = step_ic(g, ModelParams{1.0, 0.5});
    const std::size_t inside = nearest_index(g, 0.5), edge = nearest_index(g, 1.0);
    EXPECT_EQ(f.u[inside], 1.0);
    EXPECT_EQ(f.m[inside], 0.0);
    EXPECT_EQ(f.u[edge], 0.0);
    EXPECT_EQ(f.m[edge], 0.5);
}

TEST(StepIc, TwoDimensionalOutside) {
    const Grid g = make_grid(2, -5.0, 5.0, 0.1);
    const FieldPair f = step_ic(g, ModelParams{1.0, 0.3});
    const std::size_t p = nearest_index(g, 3.0, 4.0);
    EXPECT_EQ(f.u[p], 0.0);
    EXPECT_EQ(f.m[p], 0.3);
    EXPECT_EQ(f.u[nearest_index(g, 0.0, 0.0)], 1.0);
}

TEST(GaussianKernel, MatchesNormalisedTruncatedGaussian) {
    const double sigma = 5.0;
    const auto k = gaussian_kernel(sigma);
    ASSERT_EQ(k.size(), 41u);
    double norm = 0.0;
    for (int o = -20; o <= 20; ++o) norm += std::exp(-o * o / (2.0 * sigma * sigma));
    // Close to the continuous value 1/(sqrt(2 pi) sigma) because 4 sigma captures almost all mass.
    EXPECT_NEAR(1.0 / norm, 1.0 / (std::sqrt(2.0 * std::numbers::pi) * sigma), 1e-4);
    for (int o = -20; o <= 20; ++o) {
        EXPECT_NEAR(k[static_cast<std::size_t>(o + 20)], std::exp(-o * o / (2.0 * sigma * sigma)) / norm, 1e-15);
    }
}

TEST(GaussianFilter, ImpulseResponse) {
    const Grid g = make_grid(1, 0.0, 10.0, 0.1);
    Field impulse(g.size(), 0.0);
    const std::size_t c = g.size() / 2;
    impulse[c] = 1.0;
    const double sigma = 5.0;
    const Field out = gaussian_filter(impulse, g, sigma);
    double norm = 0.0;
    for (int o = -20; o <= 20; ++o) norm += std::exp(-o * o / (2.0 * sigma * sigma));
    for (std::size_t p = 0; p < g.size(); ++p) {
        const double o = static_cast<double>(p) - static_cast<double>(c);
        const double want = std::abs(o) <= 20.0 ? std::exp(-o * o / (2.0 * sigma * sigma)) / norm : 0.0;
        EXPECT_NEAR(out[p], want, 1e-6);
    }
}

TEST(GaussianFilter, ConstantsUnchanged) {
    for (int dim : {1, 2}) {
        const Grid g = make_grid(dim, 0.0, 3.0, 0.1);
        const Field out = gaussian_filter(Field(g.size(), 0.37), g, 5.0);
        for (double v : out) EXPECT_NEAR(v, 0.37, 1e-12);
    }
}

TEST(GaussianFilter, ReflectiveIndexing) {
    EXPECT_EQ(reflect_index(-1, 4), 0u);
    EXPECT_EQ(reflect_index(-2, 4), 1u);
    EXPECT_EQ(reflect_index(4, 4), 3u);
    EXPECT_EQ(reflect_index(5, 4), 2u);
    EXPECT_EQ(reflect_index(9, 4), 1u);
}

TEST(RandomEcm, DeterministicPerSeed) {
    const Grid g = make_grid(2, -5.0, 5.0, 0.1);
    const Field a = random_smoothed_ecm(g, 0.5, 5.0, 7);
    const Field b = random_smoothed_ecm(g, 0.5, 5.0, 7);
    const Field c = random_smoothed_ecm(g, 0.5, 5.0, 8);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
}

TEST(RandomEcm, MeanAndBounds) {
    const Grid g = make_grid(2, -5.0, 5.0, 0.1);
    const Field m = random_smoothed_ecm(g, 0.5, 5.0, 3);
    double mean = 0.0;
    for (double v : m) {
        EXPECT_GE(v, 0.0);
        EXPECT_LT(v, 1.0);
        mean += v;
    }
    mean /= static_cast<double>(m.size());
    EXPECT_NEAR(mean, 0.5, 0.02);
}

TEST(SinusoidalEcm, Values) {
    const double pi = std::numbers::pi;
    const Grid g = make_grid(1, 0.0, 10.0 * pi, 0.5 * pi);
    const Field m = sinusoidal_ecm(g);
    EXPECT_NEAR(m[0], 0.5, 1e-15);
    EXPECT_NEAR(m[10], 0.75, 1e-12);
    for (double v : sinusoidal_ecm(make_grid(1, 0.0, 200.0, 0.1))) {
        EXPECT_GE(v, 0.25);
        EXPECT_LE(v, 0.75);
    }
    EXPECT_THROW(sinusoidal_ecm(make_grid(2, 0.0, 1.0, 0.1)), ConfigError);
}

TEST(InitialFields, AllKindsAdmissible) {
    const ModelParams params{1.0, 0.5};
    const Grid line = make_grid(1, 0.0, 50.0, 0.1);
    const Grid square = make_grid(2, -5.0, 5.0, 0.1);
    expect_admissible(make_initial_fields(line, params, IcSpec{IcKind::step}));
    expect_admissible(make_initial_fields(line, params, IcSpec{IcKind::sinusoidal}));
    expect_admissible(make_initial_fields(line, params, IcSpec{IcKind::random_gaussian}));
    expect_admissible(make_initial_fields(square, params, IcSpec{IcKind::step}));
    expect_admissible(make_initial_fields(square, params, IcSpec{IcKind::random_gaussian}));
}
