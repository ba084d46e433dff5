#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ecm_invade/errors.hpp"

namespace ecm_invade {

/// Scalar lattice field, stored row-major (see Grid::index).
using Field = std::vector<double>;

struct Axis {
    double min = 0.0;
    double max = 0.0;
    std::size_t n = 1;
};

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Uniform 1D or 2D lattice. The spacing is shared by every axis and the
/// lattice includes both end points of each axis.
///
/// 2D fields are stored row-major with the x index outermost:
/// (i, j) -> i * ny + j, where i runs along x and j along y. In 1D ny == 1.
class Grid {
public:
    Grid() = default;

    int dim() const noexcept { return dim_; }
    double spacing() const noexcept { return spacing_; }
    const Axis& axis(int a) const { return axes_.at(static_cast<std::size_t>(a)); }
    std::size_t nx() const noexcept { return axes_[0].n; }
    std::size_t ny() const noexcept { return dim_ == 2 ? axes_[1].n : 1; }
    std::size_t size() const noexcept { return nx() * ny(); }

    std::size_t index(std::size_t i, std::size_t j = 0) const noexcept { return i * ny() + j; }

    double coord(int a, std::size_t i) const {
        return axis(a).min + static_cast<double>(i) * spacing_;
    }

    Point point(std::size_t p) const {
        const std::size_t i = p / ny();
        const std::size_t j = p % ny();
        return {coord(0, i), dim_ == 2 ? coord(1, j) : 0.0};
    }

    /// Trapezoidal quadrature weight of lattice point p (includes dx^dim).
    double weight(std::size_t p) const {
        const std::size_t i = p / ny();
        const std::size_t j = p % ny();
        double w = spacing_ * ((i == 0 || i + 1 == nx()) ? 0.5 : 1.0);
        if (dim_ == 2) w *= spacing_ * ((j == 0 || j + 1 == ny()) ? 0.5 : 1.0);
        return w;
    }

    /// Lebesgue measure of the domain.
    double measure() const {
        double m = axes_[0].max - axes_[0].min;
        if (dim_ == 2) m *= axes_[1].max - axes_[1].min;
        return m;
    }

    void require_field(std::span<const double> f, const char* name = "field") const {
        if (f.size() != size()) {
            throw ShapeError(std::string(name) + " has " + std::to_string(f.size()) +
                             " values, grid has " + std::to_string(size()));
        }
    }

    friend bool operator==(const Grid& a, const Grid& b) {
        return a.dim_ == b.dim_ && a.spacing_ == b.spacing_ && a.axes_[0].min == b.axes_[0].min &&
               a.axes_[0].max == b.axes_[0].max && a.axes_[0].n == b.axes_[0].n &&
               a.axes_[1].min == b.axes_[1].min && a.axes_[1].max == b.axes_[1].max &&
               a.axes_[1].n == b.axes_[1].n;
    }

private:
    friend Grid make_grid(int, double, double, double);

    int dim_ = 1;
    double spacing_ = 1.0;
    std::array<Axis, 2> axes_{};
};

/// Builds a uniform lattice with identical extents on every axis.
/// Throws ConfigError unless the extent is an integer multiple of the
/// spacing (1e-12 relative) and each axis has at least three points.
inline Grid make_grid(int dim, double extent_min, double extent_max, double spacing) {
    if (dim != 1 && dim != 2) throw ConfigError("grid.dim must be 1 or 2");
    if (!(spacing > 0.0) || !std::isfinite(spacing)) throw ConfigError("grid.spacing must be positive");
    if (!(extent_max > extent_min)) throw ConfigError("grid.x_max must exceed grid.x_min");

    const double cells = (extent_max - extent_min) / spacing;
    const double rounded = std::round(cells);
    if (std::abs(cells - rounded) > 1e-12 * std::max(1.0, cells)) {
        throw ConfigError("grid extent " + std::to_string(extent_max - extent_min) +
                          " is not an integer multiple of spacing " + std::to_string(spacing));
    }
    const auto n = static_cast<std::size_t>(rounded) + 1;
    if (n < 3) throw ConfigError("grid needs at least 3 points per axis");

    Grid g;
    g.dim_ = dim;
    g.spacing_ = spacing;
    g.axes_[0] = {extent_min, extent_max, n};
    g.axes_[1] = dim == 2 ? Axis{extent_min, extent_max, n} : Axis{0.0, 0.0, 1};
    return g;
}

/// Row-major list of lattice coordinates (y == 0 in 1D).
inline std::vector<Point> coordinates(const Grid& g) {
    std::vector<Point> pts(g.size());
    for (std::size_t p = 0; p < pts.size(); ++p) pts[p] = g.point(p);
    return pts;
}

/// Trapezoidal integral of f over the domain.
inline double integrate(const Grid& g, std::span<const double> f) {
    g.require_field(f);
    double s = 0.0;
    for (std::size_t p = 0; p < f.size(); ++p) s += g.weight(p) * f[p];
    return s;
}

}  // namespace ecm_invade
