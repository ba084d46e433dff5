#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ecm_invade/errors.hpp"
#include "ecm_invade/grid.hpp"
#include "ecm_invade/model.hpp"

namespace ecm_invade {

inline double distance_from_origin(const Point& pt) { return std::hypot(pt.x, pt.y); }

/// u = 1, m = 0 inside |x| < 1; u = 0, m = m0 elsewhere.
inline FieldPair step_ic(const Grid& g, const ModelParams& params) {
    params.validate();
    FieldPair f{Field(g.size()), Field(g.size())};
    for (std::size_t p = 0; p < g.size(); ++p) {
        const bool inside = distance_from_origin(g.point(p)) < 1.0;
        f.u[p] = inside ? 1.0 : 0.0;
        f.m[p] = inside ? 0.0 : params.m0;
    }
    return f;
}

/// Normalised Gaussian weights for offsets -radius..radius, radius = ceil(4 sigma).
/// sigma is in lattice units.
inline std::vector<double> gaussian_kernel(double sigma) {
    if (!(sigma > 0.0)) throw ConfigError("ic.sigma must be positive");
    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (std::ptrdiff_t o = -radius; o <= radius; ++o) {
        const double v = std::exp(-0.5 * static_cast<double>(o * o) / (sigma * sigma));
        k[static_cast<std::size_t>(o + radius)] = v;
        sum += v;
    }
    for (double& v : k) v /= sum;
    return k;
}

/// Maps an out-of-range index into [0, n) by half-sample reflection
/// (d c b a | a b c d | d c b a).
inline std::size_t reflect_index(std::ptrdiff_t k, std::size_t n) {
    const auto period = static_cast<std::ptrdiff_t>(2 * n);
    std::ptrdiff_t r = k % period;
    if (r < 0) r += period;
    if (r >= static_cast<std::ptrdiff_t>(n)) r = period - 1 - r;
    return static_cast<std::size_t>(r);
}

/// Separable truncated Gaussian convolution with reflective boundaries.
inline Field gaussian_filter(std::span<const double> f, const Grid& g, double sigma) {
    g.require_field(f, "field");
    const auto kernel = gaussian_kernel(sigma);
    const auto radius = static_cast<std::ptrdiff_t>(kernel.size() / 2);
    Field cur(f.begin(), f.end());
    Field next(f.size());
    const std::size_t nx = g.nx();
    const std::size_t ny = g.ny();
    // Along x (stride ny).
    for (std::size_t i = 0; i < nx; ++i) {
        for (std::size_t j = 0; j < ny; ++j) {
            double s = 0.0;
            for (std::ptrdiff_t o = -radius; o <= radius; ++o) {
                const std::size_t ii = reflect_index(static_cast<std::ptrdiff_t>(i) + o, nx);
                s += kernel[static_cast<std::size_t>(o + radius)] * cur[ii * ny + j];
            }
            next[i * ny + j] = s;
        }
    }
    cur.swap(next);
    if (g.dim() == 2) {
        for (std::size_t i = 0; i < nx; ++i) {
            for (std::size_t j = 0; j < ny; ++j) {
                double s = 0.0;
                for (std::ptrdiff_t o = -radius; o <= radius; ++o) {
                    const std::size_t jj = reflect_index(static_cast<std::ptrdiff_t>(j) + o, ny);
                    s += kernel[static_cast<std::size_t>(o + radius)] * cur[i * ny + jj];
                }
                next[i * ny + j] = s;
            }
        }
        cur.swap(next);
    }
    return cur;
}

/// i.i.d. uniform [0, 1) samples, one per lattice point, from mt19937_64(seed).
inline Field uniform_field(const Grid& g, std::uint64_t seed) {
    std::mt19937_64 engine(seed);
    Field f(g.size());
    for (double& v : f) v = static_cast<double>(engine() >> 11) * 0x1.0p-53;
    return f;
}

/// Gaussian-smoothed random ECM rescaled to mean m0_mean, clamped to
/// [0, 1 - 1e-6], and cleared inside |x| < 1 where the cells start.
inline Field random_smoothed_ecm(const Grid& g, double m0_mean, double sigma, std::uint64_t seed) {
    if (!(m0_mean >= 0.0 && m0_mean <= 1.0)) throw ConfigError("random ECM mean must lie in [0, 1]");
    Field m = gaussian_filter(uniform_field(g, seed), g, sigma);
    double mean = 0.0;
    for (double v : m) mean += v;
    mean /= static_cast<double>(m.size());
    const double scale = mean > 0.0 ? m0_mean / mean : 0.0;
    for (std::size_t p = 0; p < m.size(); ++p) {
        m[p] = std::clamp(m[p] * scale, 0.0, 1.0 - 1e-6);
        if (distance_from_origin(g.point(p)) < 1.0) m[p] = 0.0;
    }
    return m;
}

/// m(x) = 0.5 + 0.25 sin(x / 10) on a 1D grid.
inline Field sinusoidal_ecm(const Grid& g) {
    if (g.dim() != 1) throw ConfigError("sinusoidal ECM needs a 1D grid");
    Field m(g.size());
    for (std::size_t p = 0; p < m.size(); ++p) m[p] = 0.5 + 0.25 * std::sin(g.point(p).x / 10.0);
    return m;
}

enum class IcKind { step, random_gaussian, sinusoidal };

struct IcSpec {
    IcKind kind = IcKind::step;
    double sigma = 5.0;  ///< Gaussian filter width in lattice units
    std::uint64_t seed = 42;

    bool operator==(const IcSpec&) const = default;
};

/// Initial (u, m) for a run. Cells follow the step profile; the ECM follows
/// the selected kind and is zero wherever the cells fill the volume.
inline FieldPair make_initial_fields(const Grid& g, const ModelParams& params, const IcSpec& spec) {
    FieldPair f = step_ic(g, params);
    switch (spec.kind) {
        case IcKind::step:
            break;
        case IcKind::random_gaussian:
            f.m = random_smoothed_ecm(g, params.m0, spec.sigma, spec.seed);
            break;
        case IcKind::sinusoidal:
            f.m = sinusoidal_ecm(g);
            for (std::size_t p = 0; p < f.m.size(); ++p) {
                if (f.u[p] > 0.0) f.m[p] = 0.0;
            }
            break;
    }
    return f;
}

}  // namespace ecm_invade
