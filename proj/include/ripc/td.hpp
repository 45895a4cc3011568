#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "ripc/fd.hpp"
#include "ripc/model.hpp"
#include "ripc/net.hpp"
#include "ripc/policy_eval.hpp"
#include "ripc/sde.hpp"

namespace ripc {

struct Diverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// AdamW with decoupled weight decay and bias correction.
struct AdamWState {
    double lr = 1e-3;
    double weight_decay = 1e-4;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long t = 0;
    ParamVec m, v;

    void reset(size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
        t = 0;
    }

    void step(ParamVec& p, const ParamVec& g) {
        if (m.size() != p.size()) reset(p.size());
        if (g.size() != p.size())
            throw std::invalid_argument("AdamWState::step: gradient size mismatch");
        ++t;
        double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (size_t i = 0; i < p.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            p[i] -= lr * ((m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps) + weight_decay * p[i]);
        }
    }
};

/**
 * Monte-Carlo estimate of the randomized intervention operator at x. The
 * proposal puts the post-jump state z = x + zeta at a standard normal, so we
 * draw z directly; the estimator is the shifted log-mean-exp of
 * psi(z) + l(z - x), biased upward by Jensen with bias vanishing in the
 * sample count.
 */
template <class Psi>
double mc_nonlocal_target(Psi&& psi, const ImpulseCost& l, double x, double lambda2,
                          int n_samples, RngStream& rng) {
    if (n_samples < 1) throw InvalidSpec("mc_nonlocal_target: need n_samples >= 1");
    if (!(lambda2 > 0.0)) throw InvalidSpec("mc_nonlocal_target: lambda2 must be positive");
    std::vector<double> g(n_samples);
    double lo = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n_samples; ++j) {
        double z = rng.normal();
        g[j] = psi(z) + l(z - x);
        lo = std::min(lo, g[j]);
    }
    double s = 0.0;
    for (int j = 0; j < n_samples; ++j) s += std::exp(-(g[j] - lo) / lambda2);
    return lo - lambda2 * std::log(s / n_samples);
}

/// One-step temporal-difference residual of the randomized control equation.
template <class Psi>
double td_residual(Psi&& psi, const ModelSpec& spec, double lambda1, double dt,
                   double x_i, double x_next, double pi_i, double m_target) {
    double run = spec.f(x_i) + pi_i * m_target - lambda1 * entropy_R(pi_i);
    return psi(x_i) - std::exp(-spec.r * dt) * (1.0 - pi_i * dt) * psi(x_next) - run * dt;
}

struct TrainConfig {
    int outer = 30;            // policy-iteration sweeps
    int inner = 400;           // gradient steps per sweep
    int batch_paths = 64;      // fresh trajectories per sweep
    int minibatch = 1024;      // transitions per gradient step
    int mc_jump_samples = 512; // draws per nonlocal target
    double pi_max = 50.0;      // intensity clamp, default 0.5/dt
    SimConfig sim;

    double lr = 1e-3;
    double weight_decay = 1e-4;
    // Minibatch noise makes the nearly flat constant mode of the value (its
    // loss curvature is of order r*dt) wander; cooling the step size across
    // sweeps pins it down, while a warm boost speeds up the early sweeps
    // where that mode carries most of the initial error.
    // lr_n = lr * lr_warm_boost / (1 + lr_outer_decay * n) up to
    // lr_cool_start, geometric with lr_cool_factor per sweep beyond it.
    double lr_warm_boost = 1.0;
    double lr_outer_decay = 0.1;
    int lr_cool_start = 12;
    double lr_cool_factor = 0.82;
    // The reported and returned parameters are an exponential average of the
    // SGD iterates (Polyak averaging); the iteration itself uses the raw
    // ones. Set to 0 to disable.
    double polyak_decay = 0.999;

    // Warm-start fit of the net to the uncontrolled value.
    double prefit_lr = 3e-3;
    int prefit_batch = 256;
    int prefit_max_steps = 20000;
    int prefit_check_every = 100;
    double prefit_tol = 1e-3;

    // Snapshot table the nonlocal targets read instead of the live net.
    double table_halfwidth = 12.0;
    int table_points = 4801;

    std::vector<int> net_sizes = {1, 64, 64, 64, 1};

    TrainConfig() {
        sim.dt = 0.01;
        sim.horizon = 20.0;
        sim.x0 = X0Sampler::uniform(-4.0, 4.0);
    }

    void validate() const {
        sim.validate();
        if (outer < 1 || inner < 1 || batch_paths < 1 || minibatch < 1 ||
            mc_jump_samples < 1)
            throw InvalidSpec("TrainConfig: counts must be positive");
        if (!(pi_max > 0.0) || !(pi_max * sim.dt < 1.0))
            throw InvalidSpec("TrainConfig: need 0 < pi_max and pi_max*dt < 1");
        if (!(lr > 0.0) || !(prefit_lr > 0.0) || !(weight_decay >= 0.0) ||
            !(lr_outer_decay >= 0.0) || !(lr_warm_boost > 0.0) || lr_cool_start < 0 ||
            !(lr_cool_factor > 0.0 && lr_cool_factor <= 1.0) ||
            !(polyak_decay >= 0.0 && polyak_decay < 1.0))
            throw InvalidSpec("TrainConfig: bad optimizer constants");
        if (prefit_batch < 1 || prefit_max_steps < 1 || prefit_check_every < 1 ||
            !(prefit_tol > 0.0))
            throw InvalidSpec("TrainConfig: bad prefit constants");
        if (table_points < 3 || !(table_halfwidth > 0.0))
            throw InvalidSpec("TrainConfig: bad snapshot table");
        if (net_sizes.size() < 2 || net_sizes.front() != 1 || net_sizes.back() != 1)
            throw InvalidSpec("TrainConfig: net sizes must run from 1 to 1");
        for (int s : net_sizes)
            if (s < 1) throw InvalidSpec("TrainConfig: net layer sizes must be positive");
    }
};

struct OuterRecord {
    int outer = 0;
    double mean_loss = 0.0;
    double rel_l2 = std::numeric_limits<double>::quiet_NaN();
    double wallclock_s = 0.0; // cumulative; the one field replay may not reproduce
    double clamp_frac = 0.0;  // share of intensity evaluations that hit pi_max
};

struct TrainResult {
    ValueNet net;
    std::vector<OuterRecord> history;
    int prefit_steps = 0;
};

namespace td_detail {

constexpr uint64_t kInitStream = (1ull << 63) + 0;
constexpr uint64_t kPrefitStream = (1ull << 63) + 1;
constexpr uint64_t kMinibatchStream = (1ull << 63) + 2;

inline uint64_t splitmix64(uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline size_t draw_index(RngStream& rs, size_t n) {
    size_t i = static_cast<size_t>(rs.uniform01() * static_cast<double>(n));
    return i < n ? i : n - 1;
}

} // namespace td_detail

/// Net values tabulated on a symmetric grid; linear tails, no slope clamp,
/// so the table tracks the net itself.
inline GridFn tabulate_net(const ValueNet& net, double halfwidth, int n_points) {
    Grid1D g = Grid1D::make(-halfwidth, halfwidth, n_points);
    std::vector<double> xs(g.n);
    for (int i = 0; i < g.n; ++i) xs[i] = g.x(i);
    ValueNet::Forward f;
    net.forward(xs, f);
    return GridFn(g, std::vector<double>(f.value.data(), f.value.data() + g.n));
}

/// Relative L2 distance between the net and a reference on the reference
/// nodes inside [lo, hi]; NaN when the window is empty or the reference is 0.
inline double rel_l2_net(const ValueNet& net, const GridFn& ref, double lo, double hi) {
    std::vector<double> xs;
    std::vector<double> tv;
    for (int i = 0; i < ref.grid.n; ++i) {
        double x = ref.grid.x(i);
        if (x < lo || x > hi) continue;
        xs.push_back(x);
        tv.push_back(ref.v[i]);
    }
    if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
    ValueNet::Forward f;
    net.forward(xs, f);
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        double d = f.value(static_cast<int>(i)) - tv[i];
        num += d * d;
        den += tv[i] * tv[i];
    }
    if (!(den > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return std::sqrt(num / den);
}

/// Supervised warm start: fit the net to a grid function by minibatch AdamW
/// until the full-grid relative L2 error drops below prefit_tol. Returns the
/// step count used; throws Diverged when the budget runs out first.
inline int prefit_net(ValueNet& net, const GridFn& target, const TrainConfig& cfg,
                      uint64_t seed) {
    AdamWState opt;
    opt.lr = cfg.prefit_lr;
    opt.weight_decay = cfg.weight_decay;
    opt.reset(net.params().size());
    RngStream rs(seed, td_detail::kPrefitStream);
    const int mb = cfg.prefit_batch;
    std::vector<double> xs(mb), tv(mb);
    ValueNet::Forward fwd;
    Eigen::RowVectorXd upstream(mb);
    ParamVec grad;
    for (int k = 0; k < cfg.prefit_max_steps; ++k) {
        if (k % cfg.prefit_check_every == 0) {
            double rel = rel_l2_net(net, target,
                                    -std::numeric_limits<double>::infinity(),
                                    std::numeric_limits<double>::infinity());
            if (rel < cfg.prefit_tol) return k;
        }
        for (int j = 0; j < mb; ++j) {
            size_t i = td_detail::draw_index(rs, static_cast<size_t>(target.grid.n));
            xs[j] = target.grid.x(static_cast<int>(i));
            tv[j] = target.v[i];
        }
        net.forward(xs, fwd);
        for (int j = 0; j < mb; ++j)
            upstream(j) = 2.0 * (fwd.value(j) - tv[j]) / mb;
        net.backward(fwd, upstream, grad);
        opt.step(net.params(), grad);
        if (!net.params_finite()) throw Diverged("prefit_net: parameters went non-finite");
    }
    double rel = rel_l2_net(net, target, -std::numeric_limits<double>::infinity(),
                            std::numeric_limits<double>::infinity());
    if (rel < cfg.prefit_tol) return cfg.prefit_max_steps;
    throw Diverged("prefit_net: stalled at relative error " + std::to_string(rel));
}

/**
 * Actor-critic fixed-point iteration. Each sweep freezes a snapshot of the
 * net, simulates fresh uncontrolled paths, precomputes Monte-Carlo nonlocal
 * targets from the snapshot, then runs semi-gradient minibatch AdamW on the
 * squared TD residual; the Gibbs intensity is recomputed from the live net
 * every step but treated as a constant in the gradient, as is the
 * bootstrapped next-state value.
 *
 * The snapshot enters the targets through a dense tabulation rather than the
 * net itself; at the table resolution used the interpolation error is far
 * below the Monte-Carlo noise, and it removes the network forward pass from
 * the inner product over jump samples.
 *
 * The gradient uses a control variate: the dominant noise in the residual is
 * the diffusion innovation psi'(x)*(x_next - x - b(x) dt), which has zero
 * mean given x, so adding it back with the frozen snapshot slope leaves the
 * expected update untouched while cutting its variance by an order of
 * magnitude. Without it the value's constant mode, whose restoring force is
 * only of order r*dt per transition, wanders visibly between sweeps.
 */
inline TrainResult train(const ModelSpec& spec, const LambdaPair& lambda,
                         const TrainConfig& cfg, uint64_t seed,
                         const GridFn* reference = nullptr) {
    cfg.validate();
    auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&t0]() {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    Grid1D pregrid = reference ? reference->grid : Grid1D::make(-8.0, 8.0, 1601);
    GridFn psi0 = solve_feynman_kac(discretize_generator(spec, pregrid), spec);

    TrainResult out;
    out.net = ValueNet(cfg.net_sizes);
    {
        RngStream rs(seed, td_detail::kInitStream);
        out.net.init_params(rs);
    }
    out.prefit_steps = prefit_net(out.net, psi0, cfg, seed);

    AdamWState opt;
    opt.lr = cfg.lr;
    opt.weight_decay = cfg.weight_decay;
    opt.reset(out.net.params().size());

    const int M = cfg.sim.steps();
    const int B = cfg.batch_paths;
    const int mb = cfg.minibatch;
    const size_t pool = static_cast<size_t>(B) * M;
    const double dt = cfg.sim.dt;
    const double decay = std::exp(-spec.r * dt);

    std::vector<double> targets(pool), cv(pool);
    std::vector<double> xcat(2 * static_cast<size_t>(mb)), mt(mb), cvb(mb);
    ValueNet::Forward fwd;
    Eigen::RowVectorXd upstream(2 * mb);
    ParamVec grad;
    ParamVec theta_bar = out.net.params();
    ValueNet net_bar = out.net;

    for (int n = 0; n < cfg.outer; ++n) {
        uint64_t seed_n = td_detail::splitmix64(seed + static_cast<uint64_t>(n) + 1);
        int warm = std::min(n, cfg.lr_cool_start);
        opt.lr = cfg.lr * cfg.lr_warm_boost / (1.0 + cfg.lr_outer_decay * warm) *
                 std::pow(cfg.lr_cool_factor, std::max(0, n - cfg.lr_cool_start));

        GridFn table = tabulate_net(out.net, cfg.table_halfwidth, cfg.table_points);

        SimConfig sim = cfg.sim;
        sim.batch = B;
        sim.seed = seed_n;
        PathBatch paths = simulate_uncontrolled(spec, sim);

        for (int b = 0; b < B; ++b) {
            RngStream zs = path_stream(seed_n, b, StreamKind::jumps);
            for (int i = 0; i < M; ++i) {
                size_t idx = static_cast<size_t>(b) * M + i;
                double x = paths.at(b, i);
                targets[idx] = mc_nonlocal_target(table, spec.jump_cost, x,
                                                  lambda.lambda2, cfg.mc_jump_samples, zs);
                int cell = table.grid.cell(x);
                double slope = (table.v[cell + 1] - table.v[cell]) / table.grid.h();
                cv[idx] = slope * (paths.at(b, i + 1) - x - spec.b(x) * dt);
            }
        }

        RngStream pick(seed_n, td_detail::kMinibatchStream);
        double loss_sum = 0.0;
        long clamp_hits = 0;
        for (int k = 0; k < cfg.inner; ++k) {
            for (int j = 0; j < mb; ++j) {
                size_t idx = td_detail::draw_index(pick, pool);
                int b = static_cast<int>(idx / M);
                int i = static_cast<int>(idx % M);
                xcat[j] = paths.at(b, i);
                xcat[mb + j] = paths.at(b, i + 1);
                mt[j] = targets[idx];
                cvb[j] = cv[idx];
            }
            out.net.forward(xcat.data(), 2 * mb, fwd);
            double loss = 0.0;
            for (int j = 0; j < mb; ++j) {
                double v0 = fwd.value(j);
                double v1 = fwd.value(mb + j);
                double pi = std::exp(-(mt[j] - v0) / lambda.lambda1);
                if (!(pi >= 0.0)) throw Diverged("train: non-finite intensity");
                if (pi > cfg.pi_max) {
                    pi = cfg.pi_max;
                    ++clamp_hits;
                }
                double run = spec.f(xcat[j]) + pi * mt[j] - lambda.lambda1 * entropy_R(pi);
                double delta = v0 - decay * (1.0 - pi * dt) * v1 - run * dt +
                               decay * (1.0 - pi * dt) * cvb[j];
                loss += delta * delta;
                upstream(j) = 2.0 * delta / mb;
                upstream(mb + j) = 0.0;
            }
            loss /= mb;
            if (!(loss <= 1e6)) throw Diverged("train: loss exceeded 1e6");
            out.net.backward(fwd, upstream, grad);
            opt.step(out.net.params(), grad);
            if (cfg.polyak_decay > 0.0) {
                double c = cfg.polyak_decay;
                const ParamVec& th = out.net.params();
                for (size_t i = 0; i < theta_bar.size(); ++i)
                    theta_bar[i] = c * theta_bar[i] + (1.0 - c) * th[i];
            } else {
                theta_bar = out.net.params();
            }
            loss_sum += loss;
        }
        if (!out.net.params_finite()) throw Diverged("train: parameters went non-finite");

        OuterRecord rec;
        rec.outer = n;
        rec.mean_loss = loss_sum / cfg.inner;
        if (reference) {
            net_bar.params() = theta_bar;
            rec.rel_l2 = rel_l2_net(net_bar, *reference, -3.0, 3.0);
        }
        rec.wallclock_s = elapsed();
        rec.clamp_frac = static_cast<double>(clamp_hits) /
                         (static_cast<double>(cfg.inner) * mb);
        out.history.push_back(rec);
    }
    out.net.params() = theta_bar;
    return out;
}

} // namespace ripc
