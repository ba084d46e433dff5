#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <span>
#include <string>

#include "ecm_invade/errors.hpp"
#include "ecm_invade/grid.hpp"

namespace ecm_invade {

/// Cell density u and ECM density m on a shared grid.
struct FieldPair {
    Field u;
    Field m;
};

struct ModelParams {
    double lambda = 1.0;  ///< ECM degradation rate
    double m0 = 0.5;      ///< far-field ECM density

    void validate() const {
        if (!(lambda >= 0.0)) throw ConfigError("model.lambda must be >= 0");
        if (!(m0 >= 0.0 && m0 <= 1.0)) throw ConfigError("model.m0 must lie in [0, 1]");
    }

    bool operator==(const ModelParams&) const = default;
};

/// Calls f(p, q) for every lattice point p and each of its 2*dim stencil
/// neighbours q. Off-grid neighbours are mirrored (index -1 -> 1,
/// n -> n-2), which puts a zero normal flux on the boundary.
template <class F>
void for_each_link(const Grid& g, F&& f) {
    const std::size_t nx = g.nx();
    const std::size_t ny = g.ny();
    for (std::size_t i = 0; i < nx; ++i) {
        const std::size_t il = i == 0 ? 1 : i - 1;
        const std::size_t ir = i + 1 == nx ? nx - 2 : i + 1;
        for (std::size_t j = 0; j < ny; ++j) {
            const std::size_t p = i * ny + j;
            f(p, il * ny + j);
            f(p, ir * ny + j);
            if (g.dim() == 2) {
                const std::size_t jl = j == 0 ? 1 : j - 1;
                const std::size_t jr = j + 1 == ny ? ny - 2 : j + 1;
                f(p, i * ny + jl);
                f(p, i * ny + jr);
            }
        }
    }
}

/// Accumulates the centred approximation of div(D grad a) into out:
///   1/(2 dx^2) [(D_{i-1}+D_i) a_{i-1} - (D_{i-1}+2D_i+D_{i+1}) a_i + (D_i+D_{i+1}) a_{i+1}]
/// per axis, with mirrored boundary neighbours.
inline void add_diffusive_term(std::span<const double> D, std::span<const double> a, const Grid& g,
                               std::span<double> out, double scale = 1.0) {
    g.require_field(D, "D");
    g.require_field(a, "a");
    g.require_field(out, "out");
    const double c = scale / (2.0 * g.spacing() * g.spacing());
    for_each_link(g, [&](std::size_t p, std::size_t q) { out[p] += c * (D[p] + D[q]) * (a[q] - a[p]); });
}

inline Field diffusive_term(std::span<const double> D, std::span<const double> a, const Grid& g) {
    Field out(g.size(), 0.0);
    add_diffusive_term(D, a, g, out);
    return out;
}

/// Right-hand side of the cell equation in split flux form:
///   div[(1-u-m) grad u] + div[u grad(u+m)] + u(1-u-m).
inline Field cell_rhs(const FieldPair& f, const ModelParams&, const Grid& g) {
    g.require_field(f.u, "u");
    g.require_field(f.m, "m");
    const std::size_t n = g.size();
    Field free_space(n), rho(n), out(n);
    for (std::size_t p = 0; p < n; ++p) {
        rho[p] = f.u[p] + f.m[p];
        free_space[p] = 1.0 - rho[p];
        out[p] = f.u[p] * free_space[p];
    }
    add_diffusive_term(free_space, f.u, g, out);
    add_diffusive_term(f.u, rho, g, out);
    return out;
}

/// Pointwise ECM degradation -lambda m u.
inline Field ecm_rhs(const FieldPair& f, const ModelParams& params) {
    if (f.u.size() != f.m.size()) throw ShapeError("u and m differ in size");
    Field out(f.m.size());
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = -params.lambda * f.m[p] * f.u[p];
    return out;
}

struct BoxExtrema {
    double min_u = 0.0;
    double min_m = 0.0;
    double max_rho = 0.0;
};

inline BoxExtrema box_extrema(const FieldPair& f) {
    BoxExtrema e{f.u.at(0), f.m.at(0), f.u[0] + f.m[0]};
    for (std::size_t p = 1; p < f.u.size(); ++p) {
        e.min_u = std::min(e.min_u, f.u[p]);
        e.min_m = std::min(e.min_m, f.m[p]);
        e.max_rho = std::max(e.max_rho, f.u[p] + f.m[p]);
    }
    return e;
}

/// Throws StabilityError at the first point violating 0 <= u, 0 <= m, u+m <= 1
/// by more than tol.
inline void check_box(const FieldPair& f, double tol, double time) {
    for (std::size_t p = 0; p < f.u.size(); ++p) {
        const double u = f.u[p];
        const double m = f.m[p];
        char what[96] = "";
        if (!(u >= -tol)) std::snprintf(what, sizeof what, "u = %.6e < 0", u);
        else if (!(m >= -tol)) std::snprintf(what, sizeof what, "m = %.6e < 0", m);
        else if (!(u + m <= 1.0 + tol)) std::snprintf(what, sizeof what, "u + m = 1 + %.6e", u + m - 1.0);
        if (what[0] != '\0') {
            throw StabilityError("box constraint violated at point " + std::to_string(p) + ", t = " +
                                     std::to_string(time) + ": " + what,
                                 p, time);
        }
    }
}

}  // namespace ecm_invade
