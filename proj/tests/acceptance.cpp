// Acceptance gate. Each criterion prints exactly one line,
//   CRITERION k: PASS (...)   or   CRITERION k: FAIL (...),
// and the process exits 0 only if every selected criterion passed.
// Criteria are selected by number on the command line; no arguments runs all.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdarg>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ripc/csv.hpp"
#include "ripc/fd.hpp"
#include "ripc/fixed_point.hpp"
#include "ripc/grid.hpp"
#include "ripc/model.hpp"
#include "ripc/net.hpp"
#include "ripc/nonlocal.hpp"
#include "ripc/policy_eval.hpp"
#include "ripc/rng.hpp"
#include "ripc/sde.hpp"
#include "ripc/td.hpp"
#include "testutil.hpp"

namespace fs = std::filesystem;
using namespace ripc;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

void report(int k, const Outcome& o) {
    std::printf("CRITERION %d: %s (%s)\n", k, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
}

const LambdaPair kLam{0.5, 0.5};

Grid1D bench_grid() { return Grid1D::make(-8.0, 8.0, 1601); }

// ---------------------------------------------------------------- 1, 2, 3

// The three fixed-point criteria share one outer loop, replicated here with
// the solver's own building blocks so every iterate is visible nodewise.
void run_fixed_point_block(const std::set<int>& want, std::vector<std::pair<int, Outcome>>& out) {
    auto t0 = Clock::now();
    ModelSpec spec = benchmark_default();
    Grid1D g = bench_grid();
    OuterConfig cfg;

    auto gen = discretize_generator(spec, g);
    GridFn psi = solve_feynman_kac(gen, spec);
    QuadratureRule rule = make_rule_for(psi);

    bool mono = true;
    double worst_increase = -std::numeric_limits<double>::infinity();
    std::vector<double> iterates;
    for (int n = 0; n < cfg.max_outer; ++n) {
        GridFn m_psi = randomized_M_gridfn(psi, spec, kLam.lambda2, rule);
        GridFn next = solve_semilinear_stopping(gen, spec, m_psi, kLam.lambda1, psi,
                                                cfg.tol_newton);
        for (int i = 0; i < g.n; ++i) {
            double inc = next.v[i] - psi.v[i];
            worst_increase = std::max(worst_increase, inc);
            if (inc > 1e-9) mono = false;
        }
        double d = sup_diff(next, psi);
        iterates.push_back(d);
        psi = std::move(next);
        if (d < cfg.tol_outer) break;
    }
    double elapsed = seconds_since(t0);

    if (want.count(1)) {
        Outcome o;
        o.pass = mono && elapsed < 60.0;
        o.detail = fmt("max nodewise increase %.3g vs 1e-9, %zu outers, %.1f s vs 60 s",
                       worst_increase, iterates.size(), elapsed);
        out.emplace_back(1, o);
    }
    if (want.count(2)) {
        Outcome o;
        try {
            auto [q, r2] = estimate_contraction(iterates);
            o.pass = q < 1.0 && r2 > 0.98 && iterates.size() >= 4;
            o.detail = fmt("q_hat %.4f vs 1, r2 %.4f vs 0.98, %zu sup-differences", q, r2,
                           iterates.size());
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = e.what();
        }
        out.emplace_back(2, o);
    }
    if (want.count(3)) {
        Outcome o;
        GridFn m_psi = randomized_M_gridfn(psi, spec, kLam.lambda2, rule);
        double res = hjb_residual(psi, m_psi, spec, kLam.lambda1);
        GridFn extra = solve_semilinear_stopping(gen, spec, m_psi, kLam.lambda1, psi,
                                                 cfg.tol_newton);
        double delta = sup_diff(extra, psi);
        o.pass = res < 1e-6 && delta < 2e-8;
        o.detail = fmt("interior residual %.3g vs 1e-6, extra outer moves %.3g vs 2e-8", res,
                       delta);
        out.emplace_back(3, o);
    }
}

// --------------------------------------------------------------------- 4

Outcome run_operator_suite() {
    auto t0 = Clock::now();
    ModelSpec spec = benchmark_default();
    double Ll = spec.lip_l();
    Grid1D g = Grid1D::make(-8.0, 8.0, 201);
    testutil::TestRng rng(20240817);

    // segment slopes stay below the proportional jump cost so the classical
    // minimizer cannot escape every finite search window
    const double max_slope = 0.4;
    const double lam_list[] = {0.05, 0.1, 0.5, 1.0};

    double worst_nonexp = -std::numeric_limits<double>::infinity();
    double worst_mono = -std::numeric_limits<double>::infinity();
    double worst_dom = -std::numeric_limits<double>::infinity();
    double worst_lip = -std::numeric_limits<double>::infinity();
    double worst_shift = -std::numeric_limits<double>::infinity();

    GridFn prev;
    double prev_val[3] = {0, 0, 0};
    const double anchors[3] = {-2.0, 0.3, 2.5};

    for (int t = 0; t < 200; ++t) {
        GridFn phi = testutil::random_gridfn(rng, g, max_slope);
        QuadratureRule rule = make_rule_for(phi);

        // monotonicity in the temperature
        for (double x : anchors) {
            double last = -std::numeric_limits<double>::infinity();
            for (double lam : lam_list) {
                double cur = randomized_M(phi, x, spec, lam, rule);
                worst_mono = std::max(worst_mono, last - cur);
                last = cur;
            }
        }

        // domination of the classical operator
        for (double x : anchors) {
            auto [cls, xi] = classical_M(phi, x, spec);
            (void)xi;
            for (double lam : {0.05, 0.5}) {
                double rnd = randomized_M(phi, x, spec, lam, rule);
                worst_dom = std::max(worst_dom, cls - rnd);
            }
        }

        // Lipschitz constant in the anchor
        for (int p = 0; p < 6; ++p) {
            double x = rng.uniform(-5.0, 5.0);
            double y = x + (rng.uniform01() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 4.0);
            y = std::clamp(y, -5.5, 5.5);
            double a = randomized_M(phi, x, spec, 0.2, rule);
            double b = randomized_M(phi, y, spec, 0.2, rule);
            if (std::abs(x - y) > 1e-12)
                worst_lip = std::max(worst_lip, std::abs(a - b) / std::abs(x - y));
        }

        // translation equivariance under constant shifts
        GridFn shifted = phi;
        for (double& v : shifted.v) v += 1.75;
        for (double x : anchors) {
            double a = randomized_M(phi, x, spec, 0.3, rule);
            double b = randomized_M(shifted, x, spec, 0.3, rule);
            worst_shift = std::max(worst_shift, std::abs((b - a) - 1.75));
        }

        // non-expansiveness against the previous test function
        if (t > 0) {
            double sup = testutil::sup_diff_on(phi, prev, -12.0, 12.0);
            for (int k = 0; k < 3; ++k) {
                double a = randomized_M(phi, anchors[k], spec, 0.2, rule);
                worst_nonexp = std::max(worst_nonexp, std::abs(a - prev_val[k]) - sup);
            }
        }
        for (int k = 0; k < 3; ++k) prev_val[k] = randomized_M(phi, anchors[k], spec, 0.2, rule);
        prev = phi;
    }

    double elapsed = seconds_since(t0);
    Outcome o;
    o.pass = worst_nonexp <= 1e-10 && worst_mono <= 1e-10 && worst_dom <= 1e-6 &&
             worst_lip <= Ll + 2e-6 && worst_shift <= 1e-12 && elapsed < 30.0;
    o.detail = fmt("nonexp %.2g vs 1e-10, mono %.2g vs 1e-10, domination %.2g vs 1e-6, "
                   "lip %.8f vs %.8f, shift %.2g vs 1e-12, %.1f s vs 30 s",
                   worst_nonexp, worst_mono, worst_dom, worst_lip, Ll + 2e-6, worst_shift,
                   elapsed);
    return o;
}

// --------------------------------------------------------------------- 5

Outcome run_lambda_sweep() {
    auto t0 = Clock::now();
    ModelSpec spec = benchmark_default();
    std::vector<LambdaPair> lams = {{1.0, 1.0}, {0.5, 0.5}, {0.1, 0.1}, {0.05, 0.05}};
    SweepReport rep = lambda_sweep(spec, bench_grid(), lams);

    bool ok_entries = true, strict = true, bound = true;
    std::string seq;
    double prev = std::numeric_limits<double>::infinity();
    for (const SweepEntry& e : rep.entries) {
        if (!e.error.empty()) ok_entries = false;
        seq += fmt("%.4f ", e.rel_l2_error);
        if (!(e.rel_l2_error < prev)) strict = false;
        prev = e.rel_l2_error;
        if (!e.lower_bound_ok) bound = false;
    }
    double elapsed = seconds_since(t0);
    Outcome o;
    o.pass = ok_entries && strict && bound && elapsed < 300.0;
    o.detail = fmt("rel-L2 errors %s%s, lower bound %s, %.0f s vs 300 s", seq.c_str(),
                   strict ? "strictly decreasing" : "NOT strictly decreasing",
                   bound ? "holds" : "violated", elapsed);
    return o;
}

// --------------------------------------------------------------------- 6

Outcome run_monte_carlo() {
    ModelSpec spec = benchmark_default();
    SolveResult fd = solve_randomized(spec, kLam, bench_grid());
    QuadratureRule rule = make_rule_for(fd.psi);
    GibbsFactory law = make_gibbs_factory(fd.psi, spec, kLam.lambda2, rule);
    GridFn jc = jump_cost_field(fd.psi, spec, kLam.lambda2, rule);
    double vsup = 0.0;
    for (double v : fd.psi.v) vsup = std::max(vsup, std::abs(v));

    const double z95 = 1.959963984540054;
    bool pass = true;
    std::string detail;
    int k = 0;
    for (double x0 : {-2.0, 0.0, 2.0}) {
        SimConfig sc;
        sc.dt = 0.01;
        sc.horizon = 80.0;
        sc.batch = 10000;
        sc.seed = 920 + k++;
        sc.x0 = X0Sampler::point(x0);
        CostEstimate est = evaluate_policy_cost(spec, fd.pi_star, law, sc, kLam, jc,
                                                JumpEstimator::intensity_weighted, vsup);
        // the truncation allowance is a deterministic bound on the horizon
        // bias, added to the stochastic half-width
        double half = z95 * est.std_error + est.tail_bound;
        double ref = fd.psi.eval(x0);
        bool in = est.mean - half <= ref && ref <= est.mean + half;
        pass = pass && in;
        detail += fmt("x0 %+.0f: mc %.4f ci [%.4f, %.4f] fd %.4f %s; ", x0, est.mean,
                      est.mean - half, est.mean + half, ref, in ? "in" : "OUT");
    }
    Outcome o;
    o.pass = pass;
    o.detail = detail;
    return o;
}

// --------------------------------------------------------------------- 7

Outcome run_td_training() {
    auto t0 = Clock::now();
    ModelSpec spec = benchmark_default();
    SolveResult fd = solve_randomized(spec, kLam, bench_grid());

    TrainConfig cfg;
    const int seeds = 5;
    std::vector<std::vector<double>> curves;
    for (int s = 0; s < seeds; ++s) {
        TrainResult tr = train(spec, kLam, cfg, 1000 + 7919 * static_cast<uint64_t>(s),
                               &fd.psi);
        std::vector<double> c;
        for (const OuterRecord& r : tr.history) c.push_back(r.rel_l2);
        curves.push_back(std::move(c));
    }

    std::vector<double> avg(cfg.outer, 0.0);
    for (const auto& c : curves)
        for (int j = 0; j < cfg.outer; ++j) avg[j] += c[j] / seeds;

    double final_err = avg.back();
    double running_min = std::numeric_limits<double>::infinity();
    double max_ratio = 0.0;
    for (int j = 5; j < cfg.outer; ++j) {
        running_min = std::min(running_min, avg[j]);
        max_ratio = std::max(max_ratio, avg[j] / running_min);
    }
    double elapsed = seconds_since(t0);

    Outcome o;
    o.pass = final_err <= 0.05 && max_ratio <= 1.25 && elapsed < 1800.0;
    o.detail = fmt("seed-averaged final rel-L2 %.4f vs 0.05, band ratio %.3f vs 1.25, "
                   "%.0f s vs 1800 s",
                   final_err, max_ratio, elapsed);
    return o;
}

// --------------------------------------------------------------------- 8

Outcome run_sensitivity() {
    const double sigmas[] = {0.1, 0.2, 0.3, 0.4};
    std::vector<double> value0, width, jvar;
    for (double s : sigmas) {
        ModelSpec spec = benchmark_default();
        spec.volatility = Pwl::constant(s);
        spec.sigma0 = s;
        SolveResult r = solve_randomized(spec, kLam, bench_grid());
        value0.push_back(r.psi.eval(0.0));

        double maxpi = 0.0;
        for (double p : r.pi_star.v) maxpi = std::max(maxpi, p);
        int flat = 0;
        for (double p : r.pi_star.v)
            if (p < 0.05 * maxpi) ++flat;
        width.push_back(flat * r.psi.grid.h());

        QuadratureRule rule = make_rule_for(r.psi);
        JumpGibbs gb(r.psi, spec.jump_cost, 2.0, kLam.lambda2, rule);
        jvar.push_back(gb.variance());
    }
    auto strictly_up = [](const std::vector<double>& v) {
        for (size_t i = 1; i < v.size(); ++i)
            if (!(v[i] > v[i - 1])) return false;
        return true;
    };
    Outcome o;
    o.pass = strictly_up(value0) && strictly_up(width) && strictly_up(jvar);
    o.detail = fmt("value(0) %.3f %.3f %.3f %.3f; flat width %.2f %.2f %.2f %.2f; "
                   "jump var %.4f %.4f %.4f %.4f; all %s",
                   value0[0], value0[1], value0[2], value0[3], width[0], width[1], width[2],
                   width[3], jvar[0], jvar[1], jvar[2], jvar[3],
                   o.pass ? "strictly increasing" : "NOT strictly increasing");
    return o;
}

// --------------------------------------------------------------------- 9

// gradient check shared by the hygiene criterion: worst relative error of
// backprop against central differences, scaled by the largest gradient entry
double backprop_vs_fd(ValueNet& net, uint64_t seed) {
    RngStream rs(seed, 0);
    net.init_params(rs);
    std::vector<double> xs = {-1.3, 0.2, 2.7};
    Eigen::RowVectorXd up(3);
    up << 1.7, -0.6, 0.9;

    ValueNet::Forward f;
    net.forward(xs, f);
    ParamVec grad;
    net.backward(f, up, grad);

    double gmax = 0.0;
    for (double gv : grad) gmax = std::max(gmax, std::abs(gv));
    double scale = std::max(1.0, gmax);

    const double h = 1e-5;
    double worst = 0.0;
    for (size_t i = 0; i < net.params().size(); ++i) {
        double keep = net.params()[i];
        auto loss = [&]() {
            net.forward(xs, f);
            double s = 0.0;
            for (int j = 0; j < 3; ++j) s += up(j) * f.value(j);
            return s;
        };
        net.params()[i] = keep + h;
        double lp = loss();
        net.params()[i] = keep - h;
        double lm = loss();
        net.params()[i] = keep;
        double fd = (lp - lm) / (2.0 * h);
        worst = std::max(worst, std::abs(fd - grad[i]) / scale);
    }
    return worst;
}

// drop the named column from a CSV body so telemetry does not defeat the
// byte comparison
std::string mask_column(const std::string& body, const std::string& col) {
    std::istringstream in(body);
    std::string line, out;
    int drop = -1;
    bool first = true;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string c;
        while (std::getline(ls, c, ',')) cells.push_back(c);
        if (first) {
            for (size_t i = 0; i < cells.size(); ++i)
                if (cells[i] == col) drop = static_cast<int>(i);
            first = false;
        }
        std::string rebuilt;
        for (size_t i = 0; i < cells.size(); ++i) {
            if (static_cast<int>(i) == drop) continue;
            if (!rebuilt.empty()) rebuilt += ',';
            rebuilt += cells[i];
        }
        out += rebuilt + '\n';
    }
    return out;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome run_hygiene() {
    Outcome o;
    std::string detail;
    bool pass = true;

    // backprop against finite differences on a small and a full-size net
    ValueNet small({1, 8, 1});
    ValueNet full;
    double w1 = backprop_vs_fd(small, 55);
    double w2 = backprop_vs_fd(full, 56);
    double wgrad = std::max(w1, w2);
    pass = pass && wgrad < 1e-4;
    detail += fmt("grad rel err %.2g vs 1e-4; ", wgrad);

    // Gibbs normalization and survival weights on the benchmark solve
    ModelSpec spec = benchmark_default();
    SolveResult fd = solve_randomized(spec, kLam, bench_grid());
    QuadratureRule rule = make_rule_for(fd.psi);
    double wmass = 0.0;
    for (double x : {-2.0, 0.0, 2.0})
        for (double lam : {0.5, 0.1}) {
            JumpGibbs gb(fd.psi, spec.jump_cost, x, lam, rule);
            wmass = std::max(wmass, std::abs(gb.quadrature_mass() - 1.0));
        }
    pass = pass && wmass <= 1e-8;
    detail += fmt("gibbs mass off by %.2g vs 1e-8; ", wmass);

    GibbsFactory law = make_gibbs_factory(fd.psi, spec, kLam.lambda2, rule);
    SimConfig sc;
    sc.batch = 64;
    sc.seed = 31;
    sc.x0 = X0Sampler::uniform(-4.0, 4.0);
    TrajectoryBatch tb = execute_policy(spec, fd.pi_star, law, sc);
    double wlo = 1.0, whi = 0.0;
    for (const ControlledTrajectory& tr : tb.paths) {
        double w = 1.0;
        for (double pi : tr.intensity) {
            double step = 1.0 - pi * tb.dt;
            w *= step;
            wlo = std::min(wlo, std::min(step, w));
            whi = std::max(whi, std::max(step, w));
        }
    }
    pass = pass && wlo >= 0.0 && whi <= 1.0;
    detail += fmt("survival weights in [%.4f, %.4f]; ", wlo, whi);

    // bit-exact replay of every seeded command through the installed binary
    const char* cli = std::getenv("RIPC_CLI");
    if (!cli || !*cli) {
        o.pass = false;
        o.detail = detail + "RIPC_CLI not set, replay not run";
        return o;
    }
    fs::path base = fs::temp_directory_path() /
                    fmt("ripc-accept-%llu", static_cast<unsigned long long>(
                                                std::chrono::steady_clock::now()
                                                    .time_since_epoch()
                                                    .count()));
    fs::create_directories(base);
    fs::path ini = base / "cfg.ini";
    {
        std::ofstream f(ini);
        f << "[grid]\nn_points = 201\n[sim]\nhorizon = 5\nbatch = 128\n"
          << "[train]\nouter_iters = 2\ninner_steps = 20\nbatch_paths = 4\n"
          << "minibatch = 64\nmc_jump_samples = 16\n";
    }
    struct Cmd {
        const char* name;
        std::string args;
    };
    std::vector<Cmd> cmds = {
        {"validate", "validate"},
        {"solve-fd", "solve-fd"},
        {"solve-classical", "solve-classical"},
        {"train", "train --seed 7"},
        {"evaluate", "evaluate --seed 9 --x0 -1,0,1 --paths 128"},
        {"sweep-lambda", "sweep-lambda --lambdas 1:1,0.5:0.5"},
        {"sweep-sigma", "sweep-sigma --sigmas 0.2,0.3"},
    };
    std::string replay;
    for (const Cmd& c : cmds) {
        fs::path da = base / (std::string(c.name) + "-a");
        fs::path db = base / (std::string(c.name) + "-b");
        int ra = 0, rb = 0;
        for (int rep = 0; rep < 2; ++rep) {
            const fs::path& d = rep == 0 ? da : db;
            fs::create_directories(d);
            std::string cmd = fmt("%s %s --config %s --out-dir %s > %s 2>&1", cli,
                                  c.args.c_str(), ini.string().c_str(), d.string().c_str(),
                                  (d / "stdout.txt").string().c_str());
            int rc = std::system(cmd.c_str());
            (rep == 0 ? ra : rb) = rc;
        }
        bool same = ra == 0 && rb == 0;
        if (same)
            for (const auto& ent : fs::directory_iterator(da)) {
                fs::path pb = db / ent.path().filename();
                if (!fs::exists(pb)) {
                    same = false;
                    break;
                }
                std::string ba = slurp(ent.path()), bb = slurp(pb);
                if (ent.path().filename() == "training_log.csv") {
                    ba = mask_column(ba, "wallclock_s");
                    bb = mask_column(bb, "wallclock_s");
                }
                if (ba != bb) {
                    same = false;
                    break;
                }
            }
        if (!same) {
            pass = false;
            replay += fmt("%s DIFFERS; ", c.name);
        }
    }
    if (replay.empty()) replay = "replay of 7 commands byte-identical";
    std::error_code ec;
    fs::remove_all(base, ec);

    o.pass = pass;
    o.detail = detail + replay;
    return o;
}

} // namespace

int main(int argc, char** argv) {
    std::set<int> want;
    for (int i = 1; i < argc; ++i) {
        int k = std::atoi(argv[i]);
        if (k < 1 || k > 9) {
            std::fprintf(stderr, "usage: %s [criterion numbers 1..9]\n", argv[0]);
            return 2;
        }
        want.insert(k);
    }
    if (want.empty())
        for (int k = 1; k <= 9; ++k) want.insert(k);

    std::vector<std::pair<int, Outcome>> results;
    if (want.count(1) || want.count(2) || want.count(3))
        run_fixed_point_block(want, results);
    if (want.count(4)) results.emplace_back(4, run_operator_suite());
    if (want.count(5)) results.emplace_back(5, run_lambda_sweep());
    if (want.count(6)) results.emplace_back(6, run_monte_carlo());
    if (want.count(7)) results.emplace_back(7, run_td_training());
    if (want.count(8)) results.emplace_back(8, run_sensitivity());
    if (want.count(9)) results.emplace_back(9, run_hygiene());

    std::sort(results.begin(), results.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    bool all = true;
    for (const auto& [k, o] : results) {
        report(k, o);
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
