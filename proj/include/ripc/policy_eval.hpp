#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "ripc/grid.hpp"
#include "ripc/model.hpp"
#include "ripc/nonlocal.hpp"
#include "ripc/sde.hpp"

namespace ripc {

/// R(pi) = pi - pi log pi with the continuous extension R(0) = 0.
inline double entropy_R(double pi) {
    if (!(pi >= 0.0)) throw NegativeIntensity("entropy_R: intensity must be >= 0");
    if (pi == 0.0) return 0.0;
    return pi - pi * std::log(pi);
}

struct JumpEvent {
    int step;       // fired while diffusing from t_step to t_{step+1}
    double x_pre;   // state just before the jump
    double xi;      // executed impulse
    double log_rho; // log dmu*/dPhi at xi, recorded at sample time
};

struct ControlledTrajectory {
    std::vector<double> states;    // post-jump states X_{t_i}, size steps+1
    std::vector<double> pre_jump;  // diffused pre-jump states, size steps
    std::vector<double> intensity; // pi at the pre-jump state, size steps
    std::vector<JumpEvent> jumps;
};

struct TrajectoryBatch {
    std::vector<ControlledTrajectory> paths;
    int steps = 0;
    double dt = 0.0;
    uint64_t seed = 0;
};

using GibbsFactory = std::function<JumpGibbs(double)>;

/// Jump law of the randomized policy induced by a value field.
inline GibbsFactory make_gibbs_factory(const GridFn& psi, const ModelSpec& spec,
                                       double lambda2, const QuadratureRule& rule) {
    return [psi, l = spec.jump_cost, lambda2, rule](double x) {
        return JumpGibbs(psi, l, x, lambda2, rule);
    };
}

/**
 * Runs the thinned jump-diffusion: per step diffuse by Euler-Maruyama, then
 * fire with probability min(pi(X_-) dt, 1) and draw the impulse from the
 * Gibbs law anchored at the pre-jump state. Streams are keyed by absolute
 * path index, so the batch is reproducible under any chunking.
 */
template <class PiFn>
TrajectoryBatch execute_policy(const ModelSpec& spec, PiFn&& pi, const GibbsFactory& jump_law,
                               const SimConfig& cfg) {
    cfg.validate();
    int m = cfg.steps();
    TrajectoryBatch out;
    out.steps = m;
    out.dt = cfg.dt;
    out.seed = cfg.seed;
    out.paths.resize(cfg.batch);

    double sdt = std::sqrt(cfg.dt);
    for (int b = 0; b < cfg.batch; ++b) {
        int pid = cfg.path_offset + b;
        RngStream init = path_stream(cfg.seed, pid, StreamKind::init);
        RngStream noise = path_stream(cfg.seed, pid, StreamKind::diffusion);
        RngStream thin = path_stream(cfg.seed, pid, StreamKind::thinning);
        RngStream jrng = path_stream(cfg.seed, pid, StreamKind::jumps);

        ControlledTrajectory& tr = out.paths[b];
        tr.states.resize(m + 1);
        tr.pre_jump.resize(m);
        tr.intensity.resize(m);

        double x = sample_x0(cfg.x0, init);
        tr.states[0] = x;
        for (int i = 0; i < m; ++i) {
            double xp = euler_step(spec, x, cfg.dt, sdt, noise.normal());
            double rate = pi(xp);
            if (!(rate >= 0.0))
                throw NegativeIntensity("execute_policy: intensity must be >= 0");
            tr.pre_jump[i] = xp;
            tr.intensity[i] = rate;
            double q = std::min(rate * cfg.dt, 1.0);
            if (thin.uniform01() < q) {
                JumpGibbs law = jump_law(xp);
                double xi = law.sample(jrng);
                tr.jumps.push_back({i, xp, xi, law.log_density(xi)});
                x = xp + xi;
            } else {
                x = xp;
            }
            tr.states[i + 1] = x;
        }
        if (!std::isfinite(x)) throw std::runtime_error("execute_policy: path diverged");
    }
    return out;
}

inline TrajectoryBatch execute_policy(const ModelSpec& spec, const GridFn& pi_field,
                                      const GibbsFactory& jump_law, const SimConfig& cfg) {
    return execute_policy(spec, [&](double x) { return pi_field.eval(x); }, jump_law, cfg);
}

/**
 * Expected per-jump cost under the Gibbs law, as a field on the grid:
 * c_J(x) = E_{mu*_x}[l(xi) + lambda2 log rho*_x(xi)] = M^{lambda2}psi(x) -
 * E_{mu*_x}[psi(x+xi)]. This is the intensity-weighted estimator's kernel.
 */
inline GridFn jump_cost_field(const GridFn& psi, const ModelSpec& spec, double lambda2,
                              const QuadratureRule& rule) {
    GridFn out(psi.grid, std::vector<double>(psi.grid.n), spec.jump_cost.lipschitz());
    for (int i = 0; i < psi.grid.n; ++i) {
        JumpGibbs law(psi, spec.jump_cost, psi.grid.x(i), lambda2, rule);
        out.v[i] = law.value() - law.expect_post([&](double z) { return psi.eval(z); });
    }
    return out;
}

enum class JumpEstimator { intensity_weighted, realized };

struct CostEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    long n = 0;
    double tail_bound = 0.0; // e^{-rT} sup |value| allowance for truncation
};

namespace eval_detail {

inline double pairwise_sum(const std::vector<double>& v, size_t lo, size_t hi) {
    if (hi - lo <= 8) {
        double s = 0.0;
        for (size_t i = lo; i < hi; ++i) s += v[i];
        return s;
    }
    size_t mid = lo + (hi - lo) / 2;
    return pairwise_sum(v, lo, mid) + pairwise_sum(v, mid, hi);
}

inline double pairwise_sum(const std::vector<double>& v) {
    return v.empty() ? 0.0 : pairwise_sum(v, 0, v.size());
}

} // namespace eval_detail

/// Discounted cost of one trajectory under the chosen jump estimator.
inline double trajectory_cost(const ControlledTrajectory& tr, const ModelSpec& spec,
                              const LambdaPair& lambda, const GridFn& jump_cost,
                              double dt, JumpEstimator est) {
    double decay = std::exp(-spec.r * dt);
    double disc = 1.0;
    double cost = 0.0;
    size_t next_jump = 0;
    int m = static_cast<int>(tr.pre_jump.size());
    for (int i = 0; i < m; ++i) {
        double run = spec.f(tr.states[i]) - lambda.lambda1 * entropy_R(tr.intensity[i]);
        if (est == JumpEstimator::intensity_weighted)
            run += tr.intensity[i] * jump_cost.eval(tr.pre_jump[i]);
        cost += disc * run * dt;
        if (est == JumpEstimator::realized) {
            while (next_jump < tr.jumps.size() && tr.jumps[next_jump].step == i) {
                const JumpEvent& ev = tr.jumps[next_jump];
                cost += disc * (spec.l(ev.xi) + lambda.lambda2 * ev.log_rho);
                ++next_jump;
            }
        }
        disc *= decay;
    }
    return cost;
}

/**
 * Monte Carlo estimate of the entropy-regularized cost from an executed
 * batch. Per path the running term e^{-r t_i} [f(X_i) - lambda1 R(pi_i) +
 * pi_i c_J] dt accumulates in step order; the batch mean uses a pairwise
 * reduction so the result is independent of chunking.
 */
inline CostEstimate estimate_cost(const TrajectoryBatch& batch, const ModelSpec& spec,
                                  const LambdaPair& lambda, const GridFn& jump_cost,
                                  JumpEstimator est = JumpEstimator::intensity_weighted,
                                  double value_sup = 0.0) {
    if (batch.paths.empty()) throw InvalidSpec("estimate_cost: empty batch");
    std::vector<double> costs(batch.paths.size());
    for (size_t b = 0; b < batch.paths.size(); ++b)
        costs[b] = trajectory_cost(batch.paths[b], spec, lambda, jump_cost, batch.dt, est);

    CostEstimate out;
    out.n = static_cast<long>(costs.size());
    out.mean = eval_detail::pairwise_sum(costs) / static_cast<double>(out.n);
    if (out.n > 1) {
        std::vector<double> dev2(costs.size());
        for (size_t b = 0; b < costs.size(); ++b) {
            double d = costs[b] - out.mean;
            dev2[b] = d * d;
        }
        double var = eval_detail::pairwise_sum(dev2) / static_cast<double>(out.n - 1);
        out.std_error = std::sqrt(var / static_cast<double>(out.n));
    }
    out.tail_bound = std::exp(-spec.r * batch.dt * batch.steps) * value_sup;
    return out;
}

/**
 * Chunked execute-and-estimate: runs the policy in path chunks to bound
 * memory, keyed so the union equals one monolithic batch, and reduces all
 * per-path costs at the end.
 */
template <class PiFn>
CostEstimate evaluate_policy_cost(const ModelSpec& spec, PiFn&& pi, const GibbsFactory& jump_law,
                                  const SimConfig& cfg, const LambdaPair& lambda,
                                  const GridFn& jump_cost,
                                  JumpEstimator est = JumpEstimator::intensity_weighted,
                                  double value_sup = 0.0, int chunk = 512) {
    cfg.validate();
    if (chunk < 1) throw InvalidSpec("evaluate_policy_cost: chunk must be >= 1");
    std::vector<double> costs;
    costs.reserve(cfg.batch);
    double tail = 0.0;
    for (int done = 0; done < cfg.batch; done += chunk) {
        SimConfig part = cfg;
        part.path_offset = cfg.path_offset + done;
        part.batch = std::min(chunk, cfg.batch - done);
        TrajectoryBatch tb = execute_policy(spec, pi, jump_law, part);
        for (const ControlledTrajectory& tr : tb.paths)
            costs.push_back(trajectory_cost(tr, spec, lambda, jump_cost, tb.dt, est));
        tail = std::exp(-spec.r * tb.dt * tb.steps) * value_sup;
    }
    CostEstimate out;
    out.n = static_cast<long>(costs.size());
    out.mean = eval_detail::pairwise_sum(costs) / static_cast<double>(out.n);
    if (out.n > 1) {
        std::vector<double> dev2(costs.size());
        for (size_t b = 0; b < costs.size(); ++b) {
            double d = costs[b] - out.mean;
            dev2[b] = d * d;
        }
        double var = eval_detail::pairwise_sum(dev2) / static_cast<double>(out.n - 1);
        out.std_error = std::sqrt(var / static_cast<double>(out.n));
    }
    out.tail_bound = tail;
    return out;
}

} // namespace ripc
