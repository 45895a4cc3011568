#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ripc/grid.hpp"
#include "ripc/model.hpp"

namespace ripc {

struct SingularSystem : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NoConvergence : std::runtime_error {
    double residual;
    NoConvergence(const std::string& what, double res)
        : std::runtime_error(what), residual(res) {}
};

/**
 * Tridiagonal realization of the generator L v = b v' + (sigma^2/2) v'' on a
 * uniform grid: upwind first difference, central second difference, so all
 * off-diagonal entries are nonnegative and interior row sums vanish.
 *
 * Boundary closure: the second derivative is dropped at the two boundary
 * rows. A drift pointing inward uses the one-sided difference toward the
 * interior (stays linear); a drift pointing outward multiplies the clamped
 * Lipschitz slope of the value class, which is a known constant and lands in
 * the affine term.
 */
struct DiscreteGenerator {
    Grid1D grid;
    std::vector<double> sub, diag, super, affine;

    std::vector<double> apply(const std::vector<double>& v) const {
        int n = grid.n;
        std::vector<double> out(n);
        for (int i = 0; i < n; ++i) {
            double s = diag[i] * v[i] + affine[i];
            if (i > 0) s += sub[i] * v[i - 1];
            if (i + 1 < n) s += super[i] * v[i + 1];
            out[i] = s;
        }
        return out;
    }
};

inline DiscreteGenerator discretize_generator(const ModelSpec& spec, const Grid1D& grid) {
    int n = grid.n;
    double h = grid.h();
    DiscreteGenerator gen;
    gen.grid = grid;
    gen.sub.assign(n, 0.0);
    gen.diag.assign(n, 0.0);
    gen.super.assign(n, 0.0);
    gen.affine.assign(n, 0.0);

    for (int i = 1; i + 1 < n; ++i) {
        double x = grid.x(i);
        double b = spec.b(x);
        double s2 = 0.5 * spec.sigma(x) * spec.sigma(x);
        double bp = std::max(b, 0.0), bm = std::max(-b, 0.0);
        gen.sub[i] = s2 / (h * h) + bm / h;
        gen.super[i] = s2 / (h * h) + bp / h;
        gen.diag[i] = -(gen.sub[i] + gen.super[i]);
    }

    double clamp = spec.slope_clamp();
    double b0 = spec.b(grid.x(0));
    if (b0 >= 0.0) { // inward at the left edge
        gen.super[0] = b0 / h;
        gen.diag[0] = -b0 / h;
    } else {
        if (!std::isfinite(clamp))
            throw InvalidSpec("discretize_generator: outward boundary drift needs a finite "
                              "slope clamp (requires r > G)");
        gen.affine[0] = b0 * (-clamp); // left boundary slope of the value class
    }
    double bn = spec.b(grid.x(n - 1));
    if (bn <= 0.0) { // inward at the right edge
        gen.sub[n - 1] = -bn / h;
        gen.diag[n - 1] = bn / h;
    } else {
        if (!std::isfinite(clamp))
            throw InvalidSpec("discretize_generator: outward boundary drift needs a finite "
                              "slope clamp (requires r > G)");
        gen.affine[n - 1] = bn * clamp; // right boundary slope of the value class
    }
    return gen;
}

namespace fd_detail {

/**
 * Tridiagonal solve (Thomas) with iterative refinement. Convergence is
 * measured by the componentwise relative backward error
 *   max_i |rhs_i - (A v)_i| / (|a_i v_{i-1}| + |d_i v_i| + |c_i v_{i+1}| + |rhs_i|),
 * the scale-invariant form of the residual contract. The raw sup residual
 * depends on the 1/h^2 row scale and cannot sit below ||A|| eps ||v|| in
 * double arithmetic, so an absolute threshold would be unmeetable on fine
 * grids; the backward error converges to a few eps regardless of h.
 */
inline std::vector<double> thomas_refined(const std::vector<double>& a,
                                          const std::vector<double>& d,
                                          const std::vector<double>& c,
                                          const std::vector<double>& rhs,
                                          double res_tol = 1e-12) {
    int n = static_cast<int>(d.size());
    auto thomas = [&](const std::vector<double>& b_in, std::vector<double>& x_out) {
        std::vector<double> cp(n), dp(n);
        double piv = d[0];
        if (std::abs(piv) < 1e-300) throw SingularSystem("thomas_refined: zero pivot");
        cp[0] = c[0] / piv;
        dp[0] = b_in[0] / piv;
        for (int i = 1; i < n; ++i) {
            piv = d[i] - a[i] * cp[i - 1];
            if (std::abs(piv) < 1e-300) throw SingularSystem("thomas_refined: zero pivot");
            cp[i] = c[i] / piv;
            dp[i] = (b_in[i] - a[i] * dp[i - 1]) / piv;
        }
        x_out.resize(n);
        x_out[n - 1] = dp[n - 1];
        for (int i = n - 2; i >= 0; --i) x_out[i] = dp[i] - cp[i] * x_out[i + 1];
    };

    auto backward_error = [&](const std::vector<double>& x, std::vector<double>& out) {
        out.resize(n);
        double omega = 0.0;
        for (int i = 0; i < n; ++i) {
            double av = d[i] * x[i];
            double scale = std::abs(d[i] * x[i]) + std::abs(rhs[i]);
            if (i > 0) {
                av += a[i] * x[i - 1];
                scale += std::abs(a[i] * x[i - 1]);
            }
            if (i + 1 < n) {
                av += c[i] * x[i + 1];
                scale += std::abs(c[i] * x[i + 1]);
            }
            out[i] = rhs[i] - av;
            if (out[i] != 0.0)
                omega = std::max(omega, std::abs(out[i]) / (scale > 0.0 ? scale : 1.0));
        }
        return omega;
    };

    std::vector<double> v, res, corr;
    thomas(rhs, v);
    // Always take one correction pass: it also pushes the raw residual to
    // its attainable floor, which downstream sup-norm checks rely on.
    for (int pass = 0; pass < 4; ++pass) {
        double omega = backward_error(v, res);
        if (omega < res_tol && pass > 0) return v;
        thomas(res, corr);
        for (int i = 0; i < n; ++i) v[i] += corr[i];
    }
    if (backward_error(v, res) >= res_tol)
        throw SingularSystem("thomas_refined: refinement stalled above residual tolerance");
    return v;
}

/// Solves (gen + diag(extra) - r I) v = rhs. extra <= 0 keeps the M-matrix.
inline std::vector<double> solve_shifted(const DiscreteGenerator& gen, double r,
                                         const std::vector<double>& extra,
                                         const std::vector<double>& rhs,
                                         double res_tol = 1e-12) {
    int n = gen.grid.n;
    std::vector<double> d(n);
    for (int i = 0; i < n; ++i) d[i] = gen.diag[i] + extra[i] - r;
    return thomas_refined(gen.sub, d, gen.super, rhs, res_tol);
}

} // namespace fd_detail

/// Solves (L - r) v + f = 0 on the grid of gen.
inline GridFn solve_feynman_kac(const DiscreteGenerator& gen, const ModelSpec& spec) {
    int n = gen.grid.n;
    std::vector<double> rhs(n), extra(n, 0.0);
    for (int i = 0; i < n; ++i) rhs[i] = -spec.f(gen.grid.x(i)) - gen.affine[i];
    std::vector<double> v = fd_detail::solve_shifted(gen, spec.r, extra, rhs);
    return GridFn(gen.grid, std::move(v), spec.slope_clamp());
}

/**
 * Solves the randomized-stopping equation
 *   (L - r) v + f - lambda1 exp(-(g - v)/lambda1) = 0
 * by damped Newton. The exponent is saturated at 40 to keep transient
 * iterates finite; the saturation is inactive at the solution, where
 * v - g <= lambda1 log(||f||/lambda1 + 1).
 */
inline GridFn solve_semilinear_stopping(const DiscreteGenerator& gen, const ModelSpec& spec,
                                        const GridFn& g, double lambda1, const GridFn& init,
                                        double tol = 1e-10,
                                        std::vector<double>* residual_log = nullptr,
                                        int max_newton = 100) {
    if (!(lambda1 > 0.0))
        throw std::invalid_argument("solve_semilinear_stopping: lambda1 must be positive");
    if (!g.all_finite() || !init.all_finite())
        throw std::invalid_argument("solve_semilinear_stopping: non-finite input");
    int n = gen.grid.n;
    std::vector<double> fvec(n);
    for (int i = 0; i < n; ++i) fvec[i] = spec.f(gen.grid.x(i));

    // The solution satisfies v <= g + lambda1 log(||f||/lambda1 + 1). A start
    // far above that puts Newton on the saturated flat of the exponential,
    // where the residual cannot decrease; clip the start to just above the
    // bound so warm starts near the solution pass through unchanged.
    double fmax = 0.0;
    for (double fi : fvec) fmax = std::max(fmax, std::abs(fi));
    double cap = lambda1 * (std::log(fmax / lambda1 + 1.0) + 1.0);
    std::vector<double> v = init.v;
    for (int i = 0; i < n; ++i) v[i] = std::min(v[i], g.v[i] + cap);
    auto expterm = [&](const std::vector<double>& w, int i) {
        double e = (w[i] - g.v[i]) / lambda1;
        return std::exp(std::min(e, 40.0));
    };
    auto residual = [&](const std::vector<double>& w, std::vector<double>& out) {
        double rmax = 0.0;
        std::vector<double> lw = gen.apply(w);
        out.resize(n);
        for (int i = 0; i < n; ++i) {
            out[i] = lw[i] - spec.r * w[i] + fvec[i] - lambda1 * expterm(w, i);
            rmax = std::max(rmax, std::abs(out[i]));
        }
        return rmax;
    };

    std::vector<double> F;
    double rnorm = residual(v, F);
    if (residual_log) residual_log->push_back(rnorm);
    for (int it = 0; it < max_newton; ++it) {
        if (rnorm < tol) return GridFn(gen.grid, std::move(v), spec.slope_clamp());
        // Newton system (gen - r I - diag(expterm)) step = -F; the affine
        // closure already sits inside F through gen.apply.
        std::vector<double> extra(n), rhs(n);
        for (int i = 0; i < n; ++i) {
            extra[i] = -expterm(v, i);
            rhs[i] = -F[i];
        }
        std::vector<double> step = fd_detail::solve_shifted(gen, spec.r, extra, rhs, 1e-9);
        double t = 1.0;
        std::vector<double> trial(n), Ft;
        bool accepted = false;
        for (int halve = 0; halve <= 30; ++halve) {
            for (int i = 0; i < n; ++i) trial[i] = v[i] + t * step[i];
            double rtrial = residual(trial, Ft);
            if (rtrial < (1.0 - 1e-4 * t) * rnorm || rtrial < tol) {
                v.swap(trial);
                F.swap(Ft);
                rnorm = rtrial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted)
            throw NoConvergence("solve_semilinear_stopping: line search failed", rnorm);
        if (residual_log) residual_log->push_back(rnorm);
    }
    if (rnorm < tol) return GridFn(gen.grid, std::move(v), spec.slope_clamp());
    throw NoConvergence("solve_semilinear_stopping: Newton did not converge", rnorm);
}

/**
 * Solves the classical obstacle problem min{ (L - r) v + f, g - v } = 0 by
 * Howard policy iteration on the stop/continue indicator.
 */
inline GridFn solve_obstacle_classical(const DiscreteGenerator& gen, const ModelSpec& spec,
                                       const GridFn& g, double tol = 1e-10) {
    if (!g.all_finite())
        throw std::invalid_argument("solve_obstacle_classical: non-finite obstacle");
    int n = gen.grid.n;
    std::vector<double> fvec(n);
    for (int i = 0; i < n; ++i) fvec[i] = spec.f(gen.grid.x(i));

    std::vector<char> stop(n, 0);
    std::vector<double> v(n, 0.0);
    int max_iter = 10 * n;
    for (int it = 0; it < max_iter; ++it) {
        // Linear system induced by the current policy: identity rows where
        // stopping, generator rows where continuing. Signs follow gen - r I.
        std::vector<double> a(n), d(n), c(n), rhs(n);
        for (int i = 0; i < n; ++i) {
            if (stop[i]) {
                a[i] = 0.0;
                d[i] = -1.0;
                c[i] = 0.0;
                rhs[i] = -g.v[i];
            } else {
                a[i] = gen.sub[i];
                d[i] = gen.diag[i] - spec.r;
                c[i] = gen.super[i];
                rhs[i] = -fvec[i] - gen.affine[i];
            }
        }
        v = fd_detail::thomas_refined(a, d, c, rhs, 1e-11);

        // Policy improvement: per node, keep the branch with the smaller
        // residual; at the solution the kept branch is exactly zero.
        std::vector<double> lv = gen.apply(v);
        bool changed = false;
        double res = 0.0;
        for (int i = 0; i < n; ++i) {
            double r_cont = lv[i] - spec.r * v[i] + fvec[i];
            double r_stop = g.v[i] - v[i];
            char want = r_stop < r_cont ? 1 : 0;
            if (want != stop[i]) {
                stop[i] = want;
                changed = true;
            }
            res = std::max(res, std::abs(std::min(r_cont, r_stop)));
        }
        if (!changed && res < tol) return GridFn(gen.grid, std::move(v), spec.slope_clamp());
    }
    throw NoConvergence("solve_obstacle_classical: policy iteration cycled", -1.0);
}

} // namespace ripc
