#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ripc/grid.hpp"
#include "ripc/model.hpp"
#include "ripc/quadrature.hpp"

namespace ripc {

struct WindowTooSmall : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonFinite : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Search controls for the classical nonlocal operator.
struct JumpSearchConfig {
    // Window [xi_lo, xi_hi]; NaN means the default [-|x|-10, |x|+10].
    double xi_lo = std::numeric_limits<double>::quiet_NaN();
    double xi_hi = std::numeric_limits<double>::quiet_NaN();
    int coarse_points = 2001;
    double tol = 1e-8;
};

namespace nonlocal_detail {

// Evaluates g(z) = phi(z) + l(z - x) at every rule node, splitting the panel
// that contains the cost kink z = x into two fresh Gauss-Legendre panels.
// Panel edges are already aligned with the kinks of phi, so after the split
// every panel integrand is smooth and the composite rule converges at full
// polynomial order.
inline void eval_nodes(const GridFn& phi, const ImpulseCost& l, double x,
                       const QuadratureRule& rule, std::vector<double>& zs,
                       std::vector<double>& ws, std::vector<double>& gs) {
    zs.assign(rule.nodes.begin(), rule.nodes.end());
    ws.assign(rule.weights.begin(), rule.weights.end());
    if (rule.panel_pts > 0 && rule.edges.size() >= 2 && x > rule.edges.front() &&
        x < rule.edges.back()) {
        auto it = std::upper_bound(rule.edges.begin(), rule.edges.end(), x);
        size_t k = static_cast<size_t>(it - rule.edges.begin()) - 1;
        double lo = rule.edges[k], hi = rule.edges[k + 1];
        if (x - lo > 1e-13 && hi - x > 1e-13) {
            int p = rule.panel_pts;
            std::vector<double> t, gw;
            quad_detail::gauss_legendre(p, t, gw);
            size_t base = k * static_cast<size_t>(p);
            // Drop the original nodes of panel k, append the two halves.
            for (int j = 0; j < p; ++j) ws[base + j] = 0.0;
            for (double a : {lo, x}) {
                double b = (a == lo) ? x : hi;
                double mid = 0.5 * (a + b), half = 0.5 * (b - a);
                for (int j = 0; j < p; ++j) {
                    double zz = mid + half * t[j];
                    zs.push_back(zz);
                    ws.push_back(half * gw[j] * quad_detail::normal_pdf(zz));
                }
            }
        }
    }
    gs.resize(zs.size());
    for (size_t i = 0; i < zs.size(); ++i) gs[i] = phi.eval(zs[i]) + l.eval(zs[i] - x);
}

} // namespace nonlocal_detail

/**
 * Classical nonlocal operator M phi(x) = inf_xi { phi(x+xi) + l(xi) }.
 * Coarse scan over the window followed by golden-section refinement.
 * Returns (value, minimizing xi).
 */
inline std::pair<double, double> classical_M(const GridFn& phi, double x, const ModelSpec& spec,
                                             const JumpSearchConfig& search = {}) {
    double lo = std::isnan(search.xi_lo) ? -std::abs(x) - 10.0 : search.xi_lo;
    double hi = std::isnan(search.xi_hi) ? std::abs(x) + 10.0 : search.xi_hi;
    if (!(hi > lo)) throw std::invalid_argument("classical_M: empty search window");
    int n = std::max(search.coarse_points, 3);
    auto g = [&](double xi) { return phi.eval(x + xi) + spec.jump_cost.eval(xi); };

    int best = 0;
    double best_val = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        double xi = lo + (hi - lo) * i / (n - 1);
        double v = g(xi);
        if (v < best_val) {
            best_val = v;
            best = i;
        }
    }
    if (best == 0 || best == n - 1)
        throw WindowTooSmall("classical_M: minimizer at search window boundary");

    double a = lo + (hi - lo) * (best - 1) / (n - 1);
    double b = lo + (hi - lo) * (best + 1) / (n - 1);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double gc = g(c), gd = g(d);
    while (b - a > search.tol) {
        if (gc < gd) {
            b = d;
            d = c;
            gd = gc;
            c = b - gr * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + gr * (b - a);
            gd = g(d);
        }
    }
    double xi_star = 0.5 * (a + b);
    // The cost kink at 0 and the scan lattice points are candidate minimizers
    // the golden section can straddle; keep whichever is lowest.
    double v_star = g(xi_star);
    if (std::abs(xi_star) < 0.5 * (b - a) + 1e-9 || (a <= 0.0 && 0.0 <= b)) {
        double v0 = g(0.0);
        if (v0 < v_star) {
            v_star = v0;
            xi_star = 0.0;
        }
    }
    return {v_star, xi_star};
}

/**
 * Randomized nonlocal operator
 *   M^λ phi(x) = -λ2 log E_{ζ~N(-x,1)}[ exp(-(phi(x+ζ)+l(ζ))/λ2) ],
 * evaluated by quadrature in the post-jump coordinate z = x + ζ ~ N(0,1)
 * with min-shift stabilization of the exponent.
 */
inline double randomized_M(const GridFn& phi, double x, const ImpulseCost& l, double lambda2,
                           const QuadratureRule& rule) {
    if (!(lambda2 > 0.0)) throw std::invalid_argument("randomized_M: lambda2 must be positive");
    thread_local std::vector<double> zs, ws, gs;
    nonlocal_detail::eval_nodes(phi, l, x, rule, zs, ws, gs);
    double m = std::numeric_limits<double>::infinity();
    for (double gi : gs) {
        if (!std::isfinite(gi)) throw NonFinite("randomized_M: non-finite node value");
        m = std::min(m, gi);
    }
    double s = 0.0;
    for (size_t i = 0; i < gs.size(); ++i) s += ws[i] * std::exp(-(gs[i] - m) / lambda2);
    return m - lambda2 * std::log(s);
}

inline double randomized_M(const GridFn& phi, double x, const ModelSpec& spec, double lambda2,
                           const QuadratureRule& rule) {
    return randomized_M(phi, x, spec.jump_cost, lambda2, rule);
}

/**
 * Optimal jump distribution μ*_x of the randomized operator: the Gibbs
 * reweighting dμ*_x/dΦ_x(ξ) ∝ exp(-(phi(x+ξ)+l(ξ))/λ2) of the reference
 * Φ_x = N(-x, 1). Holds the shifted log-normalizer, quadrature node values
 * for moments, and a lazily built inverse-CDF table for sampling.
 */
class JumpGibbs {
  public:
    JumpGibbs(const GridFn& phi, const ImpulseCost& l, double x, double lambda2,
              const QuadratureRule& rule)
        : phi_(phi), l_(l), x_(x), lambda2_(lambda2) {
        if (!(lambda2 > 0.0)) throw std::invalid_argument("JumpGibbs: lambda2 must be positive");
        nonlocal_detail::eval_nodes(phi_, l_, x_, rule, zs_, ws_, gs_);
        shift_ = std::numeric_limits<double>::infinity();
        for (double gi : gs_) {
            if (!std::isfinite(gi)) throw NonFinite("JumpGibbs: non-finite node value");
            shift_ = std::min(shift_, gi);
        }
        double s = 0.0;
        for (size_t i = 0; i < gs_.size(); ++i) s += ws_[i] * std::exp(-(gs_[i] - shift_) / lambda2_);
        log_sum_ = std::log(s);
    }

    double anchor() const { return x_; }
    double lambda2() const { return lambda2_; }
    // log E_{Φ_x}[exp(-(phi(x+ζ)+l(ζ))/λ2)]
    double log_normalizer() const { return log_sum_ - shift_ / lambda2_; }
    // M^λ phi(x) = -λ2 · log_normalizer
    double value() const { return shift_ - lambda2_ * log_sum_; }

    // dμ*_x/dΦ_x at ξ.
    double density(double xi) const {
        double g = phi_.eval(x_ + xi) + l_.eval(xi);
        return std::exp(-(g - shift_) / lambda2_ - log_sum_);
    }

    double log_density(double xi) const {
        double g = phi_.eval(x_ + xi) + l_.eval(xi);
        return -(g - shift_) / lambda2_ - log_sum_;
    }

    double mean() const {
        double s = 0.0;
        for (size_t i = 0; i < zs_.size(); ++i)
            s += ws_[i] * std::exp(-(gs_[i] - shift_) / lambda2_ - log_sum_) * (zs_[i] - x_);
        return s;
    }

    double variance() const {
        double mu = mean();
        double s = 0.0;
        for (size_t i = 0; i < zs_.size(); ++i) {
            double d = zs_[i] - x_ - mu;
            s += ws_[i] * std::exp(-(gs_[i] - shift_) / lambda2_ - log_sum_) * d * d;
        }
        return s;
    }

    // E_{μ*_x}[h(x + ξ)], the posterior expectation of a post-jump state
    // functional over the stored nodes.
    template <class Fn>
    double expect_post(Fn&& h) const {
        double num = 0.0, den = 0.0;
        for (size_t i = 0; i < zs_.size(); ++i) {
            double w = ws_[i] * std::exp(-(gs_[i] - shift_) / lambda2_);
            num += w * h(zs_[i]);
            den += w;
        }
        return num / den;
    }

    // ∫ ρ dΦ_x over the rule, with the density recomputed through the public
    // evaluation path; 1 up to roundoff when shift and normalizer are
    // consistent with the stored nodes.
    double quadrature_mass() const {
        double s = 0.0;
        for (size_t i = 0; i < zs_.size(); ++i) s += ws_[i] * density(zs_[i] - x_);
        return s;
    }

    // ξ ~ μ*_x by inverse CDF over ξ ∈ [-x-8, -x+8], i.e. post-jump state in
    // [-8, 8]. Rng needs uniform01().
    template <class Rng>
    double sample(Rng& rng) {
        ensure_cdf();
        double u = rng.uniform01() * cdf_.back();
        auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
        size_t i = it == cdf_.begin() ? 0 : static_cast<size_t>(it - cdf_.begin()) - 1;
        if (i >= cdf_.size() - 1) i = cdf_.size() - 2;
        double c0 = cdf_[i], c1 = cdf_[i + 1];
        double frac = c1 > c0 ? (u - c0) / (c1 - c0) : 0.5;
        return xi_lo_ + dxi_ * (static_cast<double>(i) + frac);
    }

  private:
    void ensure_cdf() {
        if (!cdf_.empty()) return;
        constexpr int knots = 4096;
        xi_lo_ = -x_ - 8.0;
        dxi_ = 16.0 / (knots - 1);
        std::vector<double> pdf(knots);
        for (int i = 0; i < knots; ++i) {
            double xi = xi_lo_ + dxi_ * i;
            pdf[i] = density(xi) * quad_detail::normal_pdf(xi + x_);
        }
        cdf_.resize(knots);
        cdf_[0] = 0.0;
        for (int i = 1; i < knots; ++i)
            cdf_[i] = cdf_[i - 1] + 0.5 * (pdf[i - 1] + pdf[i]) * dxi_;
    }

    GridFn phi_;
    ImpulseCost l_;
    double x_;
    double lambda2_;
    double shift_ = 0.0;
    double log_sum_ = 0.0;
    std::vector<double> zs_, ws_, gs_;
    std::vector<double> cdf_;
    double xi_lo_ = 0.0, dxi_ = 0.0;
};

inline double gibbs_density(const JumpGibbs& g, double xi) { return g.density(xi); }

template <class Rng>
double sample_jump(JumpGibbs& g, Rng& rng) {
    return g.sample(rng);
}

/// Panel rule aligned with the kink set of phi, suitable for randomized_M
/// against phi at any anchor x (the moving cost kink is split on the fly).
inline QuadratureRule make_rule_for(const GridFn& phi, double half_width = 12.0,
                                    double base = 0.25, int pts = 8) {
    return QuadratureRule::kink_aligned(phi.kinks(), half_width, base, pts);
}

/// M^λ phi evaluated at every node of a grid, returned as a GridFn with the
/// jump-cost Lipschitz bound as extrapolation clamp.
inline GridFn randomized_M_gridfn(const GridFn& phi, const ModelSpec& spec, double lambda2,
                                  const QuadratureRule& rule) {
    GridFn out;
    out.grid = phi.grid;
    out.slope_clamp = spec.jump_cost.lipschitz();
    out.v.resize(phi.grid.n);
    for (int i = 0; i < phi.grid.n; ++i)
        out.v[i] = randomized_M(phi, phi.grid.x(i), spec.jump_cost, lambda2, rule);
    return out;
}

} // namespace ripc
