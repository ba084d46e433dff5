#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "ecm_invade/errors.hpp"
#include "ecm_invade/grid.hpp"

namespace ecm_invade {

struct WaveTrace {
    std::vector<double> times;
    std::vector<double> front_positions;
    double threshold = 0.1;
    double fitted_speed = 0.0;
    std::array<double, 2> fit_window{0.0, 0.0};
    double fit_residual = 0.0;
};

/// Frontmost downward crossing of `threshold` in a 1D profile sampled at
/// x_k = x0 + k dx, found by scanning from the right end. Linear
/// interpolation between the bracketing samples.
inline double crossing_position(std::span<const double> u, double x0, double dx, double threshold) {
    const std::size_t n = u.size();
    if (n < 2) throw FrontNotFoundError("profile too short for front tracking");
    if (u[n - 1] >= threshold) {
        throw FrontNotFoundError("profile is above the threshold at the far boundary (front left the domain)");
    }
    for (std::size_t k = n - 1; k-- > 0;) {
        if (u[k] >= threshold) {
            if (u[k] == threshold) return x0 + static_cast<double>(k) * dx;
            const double frac = (u[k] - threshold) / (u[k] - u[k + 1]);
            return x0 + (static_cast<double>(k) + frac) * dx;
        }
    }
    throw FrontNotFoundError("no crossing of threshold " + std::to_string(threshold));
}

/// Frontmost upward crossing of `level` (values below behind, at or above ahead).
inline double rising_crossing_position(std::span<const double> m, double x0, double dx, double level) {
    std::vector<double> flipped(m.size());
    for (std::size_t k = 0; k < m.size(); ++k) flipped[k] = -m[k];
    return crossing_position(flipped, x0, dx, -level);
}

/// Front position of a 1D field on its grid.
inline double front_position(std::span<const double> u, const Grid& g, double threshold = 0.1) {
    g.require_field(u, "u");
    if (g.dim() != 1) throw ShapeError("front_position expects a 1D field; use front_position_on_axis in 2D");
    return crossing_position(u, g.axis(0).min, g.spacing(), threshold);
}

/// Bilinear interpolation of a 2D field at (x, y); the point must lie in the domain.
inline double sample_bilinear(std::span<const double> f, const Grid& g, double x, double y) {
    const double h = g.spacing();
    const double fx = std::clamp((x - g.axis(0).min) / h, 0.0, static_cast<double>(g.nx() - 1));
    const double fy = std::clamp((y - g.axis(1).min) / h, 0.0, static_cast<double>(g.ny() - 1));
    const auto i = std::min(static_cast<std::size_t>(fx), g.nx() - 2);
    const auto j = std::min(static_cast<std::size_t>(fy), g.ny() - 2);
    const double a = fx - static_cast<double>(i);
    const double b = fy - static_cast<double>(j);
    return (1 - a) * (1 - b) * f[g.index(i, j)] + a * (1 - b) * f[g.index(i + 1, j)] +
           (1 - a) * b * f[g.index(i, j + 1)] + a * b * f[g.index(i + 1, j + 1)];
}

/// Front radius along the ray from the origin at angle `angle`, sampled every dx.
inline double front_radius_on_ray(std::span<const double> u, const Grid& g, double angle, double threshold) {
    if (g.dim() != 2) throw ShapeError("ray front tracking needs a 2D grid");
    const double cx = std::cos(angle);
    const double cy = std::sin(angle);
    double r_max = std::numeric_limits<double>::infinity();
    auto limit = [&](double dir, double lo, double hi) {
        if (dir > 1e-12) r_max = std::min(r_max, hi / dir);
        else if (dir < -1e-12) r_max = std::min(r_max, lo / dir);
    };
    limit(cx, g.axis(0).min, g.axis(0).max);
    limit(cy, g.axis(1).min, g.axis(1).max);
    if (!(r_max > 0.0)) throw FrontNotFoundError("origin lies outside the domain");
    const double h = g.spacing();
    const auto count = static_cast<std::size_t>(std::floor(r_max / h + 1e-9)) + 1;
    std::vector<double> profile(count);
    for (std::size_t k = 0; k < count; ++k) {
        const double r = static_cast<double>(k) * h;
        profile[k] = sample_bilinear(u, g, r * cx, r * cy);
    }
    return crossing_position(profile, 0.0, h, threshold);
}

/// 2D front position along the positive x-axis ray through the origin.
inline double front_position_on_axis(std::span<const double> u, const Grid& g, double threshold = 0.1) {
    g.require_field(u, "u");
    return front_radius_on_ray(u, g, 0.0, threshold);
}

struct RadialFronts {
    std::vector<double> radii;
    double mean = 0.0;
    double stddev = 0.0;
};

/// Front radii over n_rays uniformly spaced rays; stddev quantifies azimuthal variation.
inline RadialFronts radial_fronts(std::span<const double> u, const Grid& g, double threshold = 0.1,
                                  std::size_t n_rays = 64) {
    g.require_field(u, "u");
    RadialFronts out;
    for (std::size_t k = 0; k < n_rays; ++k) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_rays);
        out.radii.push_back(front_radius_on_ray(u, g, angle, threshold));
    }
    double s = 0.0;
    for (double r : out.radii) s += r;
    out.mean = s / static_cast<double>(n_rays);
    double v = 0.0;
    for (double r : out.radii) v += (r - out.mean) * (r - out.mean);
    out.stddev = std::sqrt(v / static_cast<double>(n_rays));
    return out;
}

struct SpeedFit {
    double speed = 0.0;
    double intercept = 0.0;
    double residual = 0.0;  ///< RMS of the fit errors
    std::size_t points = 0;
};

/// Least-squares slope of X(t) over t in [window[0], window[1]].
inline SpeedFit estimate_speed(std::span<const double> times, std::span<const double> positions,
                               std::array<double, 2> window) {
    if (times.size() != positions.size()) throw ShapeError("times and positions differ in size");
    double st = 0.0, sx = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (times[k] < window[0] || times[k] > window[1] || !std::isfinite(positions[k])) continue;
        st += times[k];
        sx += positions[k];
        ++n;
    }
    if (n < 3) {
        throw InsufficientDataError("speed fit needs at least 3 points in [" + std::to_string(window[0]) + ", " +
                                    std::to_string(window[1]) + "], got " + std::to_string(n));
    }
    const double tm = st / static_cast<double>(n);
    const double xm = sx / static_cast<double>(n);
    double stt = 0.0, stx = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (times[k] < window[0] || times[k] > window[1] || !std::isfinite(positions[k])) continue;
        stt += (times[k] - tm) * (times[k] - tm);
        stx += (times[k] - tm) * (positions[k] - xm);
    }
    if (stt == 0.0) throw InsufficientDataError("speed fit needs distinct times");
    SpeedFit fit;
    fit.speed = stx / stt;
    fit.intercept = xm - fit.speed * tm;
    fit.points = n;
    double r2 = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (times[k] < window[0] || times[k] > window[1] || !std::isfinite(positions[k])) continue;
        const double e = positions[k] - (fit.intercept + fit.speed * times[k]);
        r2 += e * e;
    }
    fit.residual = std::sqrt(r2 / static_cast<double>(n));
    return fit;
}

/// Default fit window: the last half of the horizon.
inline std::array<double, 2> default_fit_window(double t_end) { return {0.5 * t_end, t_end}; }

/// Fills fitted_speed / fit_residual / fit_window of a trace.
inline void fit_trace(WaveTrace& trace, std::array<double, 2> window) {
    const auto fit = estimate_speed(trace.times, trace.front_positions, window);
    trace.fitted_speed = fit.speed;
    trace.fit_residual = fit.residual;
    trace.fit_window = window;
}

/// Minimum travelling-wave speed from the linearisation ahead of the front: 2 sqrt(1 - m0).
inline double analytic_min_speed(double m0) {
    if (!(m0 >= 0.0 && m0 <= 1.0)) throw DomainError("m0 must lie in [0, 1]");
    return 2.0 * std::sqrt(1.0 - m0);
}

/// Signed distance X_u - X_m between the cell front ({u > u_level}) and the
/// ECM degradation front ({m < m_level}) in 1D. Positive values mean the
/// cell front runs ahead of the degraded region (cells overlap intact ECM);
/// negative values are a gap of degraded, cell-free matrix ahead of the cells.
inline double front_overlap_width(std::span<const double> u, std::span<const double> m, const Grid& g,
                                  double u_level, double m_level) {
    g.require_field(u, "u");
    g.require_field(m, "m");
    if (g.dim() != 1) throw ShapeError("front_overlap_width expects 1D fields");
    const double xu = crossing_position(u, g.axis(0).min, g.spacing(), u_level);
    const double xm = rising_crossing_position(m, g.axis(0).min, g.spacing(), m_level);
    return xu - xm;
}

}  // namespace ecm_invade
