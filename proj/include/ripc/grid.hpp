#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace ripc {

/** Uniform 1-D grid on [x_min, x_max] with n nodes. */
struct Grid1D {
    double x_min = -8.0;
    double x_max = 8.0;
    int n = 1601;

    static Grid1D make(double lo, double hi, int n_nodes) {
        if (!(std::isfinite(lo) && std::isfinite(hi)) || !(lo < hi) || n_nodes < 3)
            throw std::invalid_argument("Grid1D: need finite x_min < x_max and n >= 3");
        return Grid1D{lo, hi, n_nodes};
    }

    double h() const { return (x_max - x_min) / (n - 1); }

    // Node formula keeps symmetric domains exactly symmetric about 0.
    double x(int i) const {
        return x_min + (x_max - x_min) * (static_cast<double>(i) / (n - 1));
    }

    // Index of the cell containing y, clamped to [0, n-2].
    int cell(double y) const {
        int i = static_cast<int>(std::floor((y - x_min) / h()));
        return std::clamp(i, 0, n - 2);
    }

    bool operator==(const Grid1D& o) const {
        return x_min == o.x_min && x_max == o.x_max && n == o.n;
    }
};

/**
 * Values on a Grid1D with linear interpolation inside the grid and linear
 * continuation outside, the boundary one-sided slope clamped to
 * +-slope_clamp. The clamp realizes the Lipschitz class of the value
 * iterates; callers set it to L_f/(r-G).
 */
struct GridFn {
    Grid1D grid;
    std::vector<double> v;
    double slope_clamp = std::numeric_limits<double>::infinity();

    GridFn() = default;
    GridFn(Grid1D g, std::vector<double> vals, double clamp = std::numeric_limits<double>::infinity())
        : grid(g), v(std::move(vals)), slope_clamp(clamp) {
        if (static_cast<int>(v.size()) != grid.n)
            throw std::invalid_argument("GridFn: value count must match grid");
    }

    static GridFn zeros(Grid1D g, double clamp = std::numeric_limits<double>::infinity()) {
        return GridFn(g, std::vector<double>(g.n, 0.0), clamp);
    }

    double left_slope() const {
        double s = (v[1] - v[0]) / grid.h();
        return std::clamp(s, -slope_clamp, slope_clamp);
    }
    double right_slope() const {
        double s = (v[grid.n - 1] - v[grid.n - 2]) / grid.h();
        return std::clamp(s, -slope_clamp, slope_clamp);
    }

    double eval(double y) const {
        if (y <= grid.x_min) return v.front() + left_slope() * (y - grid.x_min);
        if (y >= grid.x_max) return v.back() + right_slope() * (y - grid.x_max);
        int i = grid.cell(y);
        double xi = grid.x(i);
        double t = (y - xi) / grid.h();
        return v[i] + t * (v[i + 1] - v[i]);
    }

    double operator()(double y) const { return eval(y); }

    bool all_finite() const {
        for (double a : v)
            if (!std::isfinite(a)) return false;
        return true;
    }

    // Kink set of the interpolant: the interior nodes.
    std::vector<double> kinks() const {
        std::vector<double> k(grid.n);
        for (int i = 0; i < grid.n; ++i) k[i] = grid.x(i);
        return k;
    }
};

inline double sup_diff(const GridFn& a, const GridFn& b) {
    double m = 0.0;
    for (int i = 0; i < a.grid.n; ++i) m = std::max(m, std::abs(a.v[i] - b.v[i]));
    return m;
}

} // namespace ripc
