#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ripc/grid.hpp"
#include "ripc/model.hpp"
#include "ripc/rng.hpp"

namespace ripc {

struct NegativeIntensity : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class X0Kind { point, uniform };

struct X0Sampler {
    X0Kind kind = X0Kind::point;
    double x0 = 0.0;
    double lo = -4.0, hi = 4.0;

    static X0Sampler point(double x) {
        X0Sampler s;
        s.kind = X0Kind::point;
        s.x0 = x;
        return s;
    }
    static X0Sampler uniform(double lo, double hi) {
        if (!(lo < hi)) throw InvalidSpec("X0Sampler: need lo < hi");
        X0Sampler s;
        s.kind = X0Kind::uniform;
        s.lo = lo;
        s.hi = hi;
        return s;
    }
};

struct SimConfig {
    double dt = 0.01;
    double horizon = 20.0;
    int batch = 1;
    uint64_t seed = 0;
    X0Sampler x0;
    // global index of the first path; streams are keyed by absolute index,
    // so chunked runs reproduce a monolithic batch exactly
    int path_offset = 0;

    int steps() const {
        if (!(dt > 0.0) || !(horizon > 0.0))
            throw InvalidSpec("SimConfig: dt and horizon must be positive");
        long m = std::lround(horizon / dt);
        if (m < 1 || std::abs(m * dt - horizon) > 1e-9 * std::max(1.0, horizon))
            throw InvalidSpec("SimConfig: horizon must be an integer number of steps");
        return static_cast<int>(m);
    }
    void validate() const {
        steps();
        if (batch < 1) throw InvalidSpec("SimConfig: batch must be >= 1");
        if (path_offset < 0) throw InvalidSpec("SimConfig: path_offset must be >= 0");
    }
};

/// Fixed stream-id layout: every path owns one stream per purpose, so the
/// noise a path sees never depends on batch size or traversal order.
enum class StreamKind : uint64_t { diffusion = 0, thinning = 1, jumps = 2, init = 3 };

inline RngStream path_stream(uint64_t seed, int path, StreamKind kind) {
    return RngStream(seed, static_cast<uint64_t>(path) * 4 + static_cast<uint64_t>(kind));
}

struct PathBatch {
    int batch = 0;
    int steps = 0;
    double dt = 0.0;
    uint64_t seed = 0;
    std::vector<double> states; // row-major, states[b*(steps+1) + i]

    double at(int b, int i) const { return states[static_cast<size_t>(b) * (steps + 1) + i]; }
    double& at(int b, int i) { return states[static_cast<size_t>(b) * (steps + 1) + i]; }
};

inline double sample_x0(const X0Sampler& s, RngStream& rs) {
    return s.kind == X0Kind::point ? s.x0 : rs.uniform(s.lo, s.hi);
}

/// Single Euler-Maruyama update; shared so every simulator rounds alike.
/// Kept out of line so call sites cannot contract the arithmetic differently.
[[gnu::noinline]] inline double euler_step(const ModelSpec& spec, double x, double dt,
                                           double sdt, double z) {
    return x + (spec.b(x) * dt + spec.sigma(x) * sdt * z);
}

/// Euler-Maruyama on the uncontrolled diffusion, one noise stream per path.
inline PathBatch simulate_uncontrolled(const ModelSpec& spec, const SimConfig& cfg) {
    cfg.validate();
    int m = cfg.steps();
    PathBatch out;
    out.batch = cfg.batch;
    out.steps = m;
    out.dt = cfg.dt;
    out.seed = cfg.seed;
    out.states.resize(static_cast<size_t>(cfg.batch) * (m + 1));

    double sdt = std::sqrt(cfg.dt);
    for (int b = 0; b < cfg.batch; ++b) {
        RngStream init = path_stream(cfg.seed, cfg.path_offset + b, StreamKind::init);
        RngStream noise = path_stream(cfg.seed, cfg.path_offset + b, StreamKind::diffusion);
        double x = sample_x0(cfg.x0, init);
        out.at(b, 0) = x;
        for (int i = 0; i < m; ++i) {
            x = euler_step(spec, x, cfg.dt, sdt, noise.normal());
            out.at(b, i + 1) = x;
        }
        if (!std::isfinite(x))
            throw std::runtime_error("simulate_uncontrolled: path diverged");
    }
    return out;
}

struct SurvivalWeights {
    int batch = 0;
    int steps = 0;
    std::vector<double> w; // same layout as PathBatch.states
    long clipped = 0;      // count of pi*dt > 1 events, floored to factor 0

    double at(int b, int i) const { return w[static_cast<size_t>(b) * (steps + 1) + i]; }
    double& at(int b, int i) { return w[static_cast<size_t>(b) * (steps + 1) + i]; }
};

/// Discrete survival p_{i+1} = (1 - pi(X_i) dt) p_i, started at 1.
template <class Pi>
SurvivalWeights survival_weights(const PathBatch& paths, Pi&& pi, double dt) {
    if (!(dt > 0.0)) throw InvalidSpec("survival_weights: dt must be positive");
    SurvivalWeights out;
    out.batch = paths.batch;
    out.steps = paths.steps;
    out.w.resize(paths.states.size());
    for (int b = 0; b < paths.batch; ++b) {
        double p = 1.0;
        out.at(b, 0) = 1.0;
        for (int i = 0; i < paths.steps; ++i) {
            double rate = pi(paths.at(b, i));
            if (!(rate >= 0.0))
                throw NegativeIntensity("survival_weights: intensity must be >= 0");
            double factor = 1.0 - rate * dt;
            if (factor < 0.0) {
                factor = 0.0;
                ++out.clipped;
            }
            p *= factor;
            out.at(b, i + 1) = p;
        }
    }
    return out;
}

inline SurvivalWeights survival_weights(const PathBatch& paths, const GridFn& pi_field,
                                        double dt) {
    return survival_weights(paths, [&](double x) { return pi_field.eval(x); }, dt);
}

} // namespace ripc
