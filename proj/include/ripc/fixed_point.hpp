#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ripc/fd.hpp"
#include "ripc/grid.hpp"
#include "ripc/model.hpp"
#include "ripc/nonlocal.hpp"

namespace ripc {

struct InsufficientData : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// NoConvergence variant carrying the outer-iterate history.
struct OuterNoConvergence : NoConvergence {
    std::vector<double> history;
    OuterNoConvergence(const std::string& what, double res, std::vector<double> hist)
        : NoConvergence(what, res), history(std::move(hist)) {}
};

struct OuterConfig {
    double tol_outer = 1e-8;
    int max_outer = 200;
    double tol_newton = 1e-10;
};

struct SolveResult {
    GridFn psi;     // converged value function
    GridFn m_psi;   // nonlocal operator applied to psi
    GridFn pi_star; // intensity field (randomized) or action indicator (classical)
    std::vector<double> iterates; // d_n = sup |psi^{n+1} - psi^n|, n = 1, 2, ...
    int outer_iters = 0;
    double q_hat = std::numeric_limits<double>::quiet_NaN();
    double r_squared = std::numeric_limits<double>::quiet_NaN();
    double residual = std::numeric_limits<double>::quiet_NaN();
};

/// Sup over interior nodes of the randomized HJB residual
/// |(L - r) psi + f - lambda1 exp(-(m_psi - psi)/lambda1)|.
inline double hjb_residual(const GridFn& psi, const GridFn& m_psi, const ModelSpec& spec,
                           double lambda1) {
    if (!(psi.grid == m_psi.grid))
        throw std::invalid_argument("hjb_residual: grids differ");
    auto gen = discretize_generator(spec, psi.grid);
    std::vector<double> lv = gen.apply(psi.v);
    double sup = 0.0;
    for (int i = 1; i + 1 < psi.grid.n; ++i) {
        double res = lv[i] - spec.r * psi.v[i] + spec.f(psi.grid.x(i)) -
                     lambda1 * std::exp(-(m_psi.v[i] - psi.v[i]) / lambda1);
        sup = std::max(sup, std::abs(res));
    }
    return sup;
}

/// Sup over interior nodes of the classical HJB residual
/// |min{ (L - r) psi + f, m_psi - psi }|.
inline double hjb_residual_classical(const GridFn& psi, const GridFn& m_psi,
                                     const ModelSpec& spec) {
    if (!(psi.grid == m_psi.grid))
        throw std::invalid_argument("hjb_residual_classical: grids differ");
    auto gen = discretize_generator(spec, psi.grid);
    std::vector<double> lv = gen.apply(psi.v);
    double sup = 0.0;
    for (int i = 1; i + 1 < psi.grid.n; ++i) {
        double cont = lv[i] - spec.r * psi.v[i] + spec.f(psi.grid.x(i));
        double stopv = m_psi.v[i] - psi.v[i];
        sup = std::max(sup, std::abs(std::min(cont, stopv)));
    }
    return sup;
}

/**
 * Least-squares fit of log d_n against n over n >= 2. Returns
 * (q_hat = exp(slope), r_squared). A constant tail fits slope 0, so q_hat = 1
 * signals no observed contraction; callers treat q_hat >= 1 as a flag.
 */
inline std::pair<double, double> estimate_contraction(const std::vector<double>& iterates) {
    if (iterates.size() < 4)
        throw InsufficientData("estimate_contraction: need at least 4 iterates");
    // iterates[k] is d_{k+1}; fit over d_n with n >= 2, truncating at the
    // first nonpositive entry (converged-to-zero tail has no log)
    std::vector<std::pair<double, double>> pts;
    for (size_t k = 1; k < iterates.size(); ++k) {
        if (!(iterates[k] > 0.0)) break;
        pts.emplace_back(static_cast<double>(k + 1), std::log(iterates[k]));
    }
    if (pts.size() < 2)
        throw InsufficientData("estimate_contraction: too few positive iterates");
    double sx = 0.0, sy = 0.0;
    for (auto& [x, y] : pts) {
        sx += x;
        sy += y;
    }
    double mx = sx / pts.size(), my = sy / pts.size();
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (auto& [x, y] : pts) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    double slope = sxy / sxx;
    double ss_res = 0.0;
    for (auto& [x, y] : pts) {
        double pred = my + slope * (x - mx);
        ss_res += (y - pred) * (y - pred);
    }
    double r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    return {std::exp(slope), r2};
}

/**
 * Randomized fixed point: psi^0 from the no-intervention solve, then
 * psi^{n+1} = T^{lambda1}[ M^{lambda2} psi^n ] until the sup-difference
 * falls below tol_outer. The returned intensity is
 * pi* = exp(-(M^{lambda2} psi - psi)/lambda1).
 */
inline SolveResult solve_randomized(const ModelSpec& spec, const LambdaPair& lambda,
                                    const Grid1D& grid, const OuterConfig& cfg = {}) {
    auto gen = discretize_generator(spec, grid);
    GridFn psi = solve_feynman_kac(gen, spec);
    QuadratureRule rule = make_rule_for(psi);

    SolveResult out;
    bool converged = false;
    for (int n = 0; n < cfg.max_outer; ++n) {
        GridFn m_psi = randomized_M_gridfn(psi, spec, lambda.lambda2, rule);
        GridFn next = solve_semilinear_stopping(gen, spec, m_psi, lambda.lambda1, psi,
                                                cfg.tol_newton);
        double d = sup_diff(next, psi);
        out.iterates.push_back(d);
        psi = std::move(next);
        ++out.outer_iters;
        if (d < cfg.tol_outer) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw OuterNoConvergence("solve_randomized: outer loop did not converge",
                                 out.iterates.empty() ? -1.0 : out.iterates.back(),
                                 out.iterates);

    out.m_psi = randomized_M_gridfn(psi, spec, lambda.lambda2, rule);
    out.pi_star = GridFn(grid, std::vector<double>(grid.n), 0.0);
    for (int i = 0; i < grid.n; ++i)
        out.pi_star.v[i] = std::exp(-(out.m_psi.v[i] - psi.v[i]) / lambda.lambda1);
    out.residual = hjb_residual(psi, out.m_psi, spec, lambda.lambda1);
    out.psi = std::move(psi);
    if (out.iterates.size() >= 4) {
        auto [q, r2] = estimate_contraction(out.iterates);
        out.q_hat = q;
        out.r_squared = r2;
    }
    return out;
}

/// M phi at every grid node (values only), with the cost Lipschitz clamp.
inline GridFn classical_M_gridfn(const GridFn& phi, const ModelSpec& spec,
                                 const JumpSearchConfig& search = {}) {
    GridFn out(phi.grid, std::vector<double>(phi.grid.n), spec.jump_cost.lipschitz());
    for (int i = 0; i < phi.grid.n; ++i)
        out.v[i] = classical_M(phi, phi.grid.x(i), spec, search).first;
    return out;
}

/**
 * Classical fixed point: same outer loop with the hard nonlocal operator and
 * the obstacle solver. pi_star is the action-region indicator.
 */
inline SolveResult solve_classical(const ModelSpec& spec, const Grid1D& grid,
                                   const OuterConfig& cfg = {}) {
    auto gen = discretize_generator(spec, grid);
    GridFn psi = solve_feynman_kac(gen, spec);

    SolveResult out;
    bool converged = false;
    for (int n = 0; n < cfg.max_outer; ++n) {
        GridFn m_psi = classical_M_gridfn(psi, spec);
        GridFn next = solve_obstacle_classical(gen, spec, m_psi, cfg.tol_newton);
        double d = sup_diff(next, psi);
        out.iterates.push_back(d);
        psi = std::move(next);
        ++out.outer_iters;
        if (d < cfg.tol_outer) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw OuterNoConvergence("solve_classical: outer loop did not converge",
                                 out.iterates.empty() ? -1.0 : out.iterates.back(),
                                 out.iterates);

    out.m_psi = classical_M_gridfn(psi, spec);
    out.pi_star = GridFn(grid, std::vector<double>(grid.n), 0.0);
    for (int i = 0; i < grid.n; ++i)
        out.pi_star.v[i] = out.m_psi.v[i] - psi.v[i] < 1e-8 ? 1.0 : 0.0;
    out.residual = hjb_residual_classical(psi, out.m_psi, spec);
    out.psi = std::move(psi);
    if (out.iterates.size() >= 4) {
        auto [q, r2] = estimate_contraction(out.iterates);
        out.q_hat = q;
        out.r_squared = r2;
    }
    return out;
}

struct SweepEntry {
    LambdaPair lambda;
    double rel_l2_error = std::numeric_limits<double>::quiet_NaN();
    double sup_error = std::numeric_limits<double>::quiet_NaN();
    int outer_iters = 0;
    double q_hat = std::numeric_limits<double>::quiet_NaN();
    double lower_bound_margin = std::numeric_limits<double>::quiet_NaN();
    bool lower_bound_ok = false;
    double value_at_zero = std::numeric_limits<double>::quiet_NaN();
    std::string error; // empty on success
};

struct SweepReport {
    SolveResult classical;
    std::vector<SweepEntry> entries;
};

/**
 * Solves the classical problem once, then the randomized problem per lambda,
 * comparing on [-4, 4]: relative L2 error, sup error, and the one-sided
 * lower bound psi_lambda >= psi - lambda1/r - 1e-6 checked on all nodes.
 * Solver failures are recorded per entry; the sweep continues.
 */
inline SweepReport lambda_sweep(const ModelSpec& spec, const Grid1D& grid,
                                const std::vector<LambdaPair>& lambdas,
                                const OuterConfig& cfg = {}) {
    if (lambdas.empty()) throw std::invalid_argument("lambda_sweep: empty lambda list");
    SweepReport rep;
    rep.classical = solve_classical(spec, grid, cfg);
    const GridFn& psi_c = rep.classical.psi;

    for (const LambdaPair& lam : lambdas) {
        SweepEntry e;
        e.lambda = lam;
        try {
            SolveResult r = solve_randomized(spec, lam, grid, cfg);
            double num = 0.0, den = 0.0, sup = 0.0;
            for (int i = 0; i < grid.n; ++i) {
                double x = grid.x(i);
                if (x < -4.0 || x > 4.0) continue;
                double d = r.psi.v[i] - psi_c.v[i];
                num += d * d;
                den += psi_c.v[i] * psi_c.v[i];
                sup = std::max(sup, std::abs(d));
            }
            e.rel_l2_error = std::sqrt(num) / std::sqrt(den);
            e.sup_error = sup;
            e.outer_iters = r.outer_iters;
            e.q_hat = r.q_hat;
            e.value_at_zero = r.psi.eval(0.0);
            double margin = std::numeric_limits<double>::infinity();
            for (int i = 0; i < grid.n; ++i)
                margin = std::min(margin,
                                  r.psi.v[i] - (psi_c.v[i] - lam.lambda1 / spec.r));
            e.lower_bound_margin = margin;
            e.lower_bound_ok = margin >= -1e-6;
        } catch (const std::exception& ex) {
            e.error = ex.what();
        }
        rep.entries.push_back(std::move(e));
    }
    return rep;
}

} // namespace ripc
