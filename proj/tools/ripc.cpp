/**
 * Command-line driver: loads a run configuration, dispatches one subcommand,
 * and emits CSV reports. Exit codes: 0 success, 2 validation or convergence
 * failure, 3 usage or parse error.
 */

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ripc/config.hpp"
#include "ripc/csv.hpp"
#include "ripc/fixed_point.hpp"
#include "ripc/net.hpp"
#include "ripc/policy_eval.hpp"
#include "ripc/td.hpp"

using namespace ripc;

namespace {

struct CliArgs {
    std::string config_path;
    std::string out_dir;
    uint64_t seed = 0;
    bool seed_set = false, out_set = false;
    double lambda1 = 0.0, lambda2 = 0.0;
    bool l1_set = false, l2_set = false;

    std::string x0_list = "-2,0,2";
    std::string lambda_list = "1:1,0.5:0.5,0.1:0.1,0.05:0.05";
    std::string sigma_list = "0.1,0.2,0.3,0.4";
    bool dry_run = false;
    bool pi_zero = false;
    int paths_override = 0;
    double horizon_override = 0.0;
};

RunConfig resolve(const CliArgs& a) {
    RunConfig rc = a.config_path.empty() ? RunConfig{} : load_config(a.config_path);
    if (a.seed_set) rc.seed = a.seed;
    if (a.out_set) rc.out_dir = a.out_dir;
    if (a.l1_set) rc.lambda.lambda1 = a.lambda1;
    if (a.l2_set) rc.lambda.lambda2 = a.lambda2;
    return rc;
}

std::string out_path(const RunConfig& rc, const std::string& name) {
    std::filesystem::create_directories(rc.out_dir);
    return (std::filesystem::path(rc.out_dir) / name).string();
}

std::vector<double> parse_reals(const std::string& what, const std::string& s) {
    std::vector<double> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = config_detail::trim(item);
        if (item.empty()) continue;
        out.push_back(config_detail::to_real(what, item));
    }
    return out;
}

std::vector<LambdaPair> parse_lambdas(const std::string& s) {
    std::vector<LambdaPair> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = config_detail::trim(item);
        if (item.empty()) continue;
        size_t colon = item.find(':');
        if (colon == std::string::npos)
            throw ParseError("lambda list entries must look like L1:L2, got '" + item + "'");
        out.push_back({config_detail::to_real("lambda1", item.substr(0, colon)),
                       config_detail::to_real("lambda2", item.substr(colon + 1))});
    }
    if (out.empty()) throw ParseError("lambda list is empty");
    return out;
}

int cmd_validate(const RunConfig& rc) {
    ValidationReport rep = validate_assumptions(rc.spec);
    for (const auto& c : rep.checks)
        std::printf("%-4s %-38s %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                    c.detail.c_str());
    for (const auto& w : rep.warnings) std::printf("warn %s\n", w.c_str());
    if (!(rc.lambda.lambda1 > 0.0) || !(rc.lambda.lambda2 > 0.0)) {
        std::printf("FAIL lambda positivity\n");
        return 2;
    }
    std::printf("%s\n", rep.ok() ? "all assumptions hold" : "assumption check failed");
    return rep.ok() ? 0 : 2;
}

int cmd_solve_fd(const RunConfig& rc) {
    SolveResult sol = solve_randomized(rc.spec, rc.lambda, rc.grid);
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < rc.grid.n; ++i)
        rows.push_back({rc.grid.x(i), sol.psi.v[i], sol.m_psi.v[i], sol.pi_star.v[i]});
    write_csv(out_path(rc, "psi_lambda.csv"), {"x", "psi", "m_psi", "pi_star"}, rows);

    std::vector<std::vector<double>> diag;
    for (size_t n = 0; n < sol.iterates.size(); ++n)
        diag.push_back({static_cast<double>(n + 1), sol.iterates[n]});
    write_csv(out_path(rc, "diagnostics.csv"), {"n", "d_n"}, diag);

    std::printf("outer_iters=%d q_hat=%.6f residual=%.3e psi(0)=%.6f\n", sol.outer_iters,
                sol.q_hat, sol.residual, sol.psi(0.0));
    return 0;
}

int cmd_solve_classical(const RunConfig& rc) {
    SolveResult sol = solve_classical(rc.spec, rc.grid);
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < rc.grid.n; ++i)
        rows.push_back({rc.grid.x(i), sol.psi.v[i], 1.0 - sol.pi_star.v[i]});
    write_csv(out_path(rc, "psi_classical.csv"), {"x", "psi", "in_continuation"}, rows);
    std::printf("outer_iters=%d residual=%.3e psi(0)=%.6f\n", sol.outer_iters, sol.residual,
                sol.psi(0.0));
    return 0;
}

int cmd_train(const RunConfig& rc, bool dry_run) {
    if (dry_run) {
        const TrainConfig& t = rc.train;
        std::printf("[lambda]\nlambda1 = %.17g\nlambda2 = %.17g\n", rc.lambda.lambda1,
                    rc.lambda.lambda2);
        std::printf("[grid]\nx_min = %.17g\nx_max = %.17g\nn_points = %d\n", rc.grid.x_min,
                    rc.grid.x_max, rc.grid.n);
        std::printf(
            "[train]\nouter_iters = %d\ninner_steps = %d\nbatch_paths = %d\nminibatch = %d\n"
            "mc_jump_samples = %d\npi_max = %.17g\nlr = %.17g\nweight_decay = %.17g\n",
            t.outer, t.inner, t.batch_paths, t.minibatch, t.mc_jump_samples, t.pi_max, t.lr,
            t.weight_decay);
        std::printf("[run]\nseed = %llu\n", static_cast<unsigned long long>(rc.seed));
        return 0;
    }
    if (!(rc.lambda.lambda1 > 0.0) || !(rc.lambda.lambda2 > 0.0))
        throw InvalidSpec("train: lambda components must be positive");

    SolveResult fd = solve_randomized(rc.spec, rc.lambda, rc.grid);
    TrainResult res = train(rc.spec, rc.lambda, rc.train, rc.seed, &fd.psi);

    std::vector<std::vector<double>> log;
    for (const auto& r : res.history)
        log.push_back({static_cast<double>(r.outer), r.mean_loss, r.rel_l2, r.wallclock_s});
    write_csv(out_path(rc, "training_log.csv"),
              {"outer_iter", "mean_loss", "rel_l2_vs_reference", "wallclock_s"}, log);

    save_checkpoint(res.net, out_path(rc, "net_checkpoint.bin"));

    std::vector<std::vector<double>> vals;
    for (int i = 0; i < rc.grid.n; ++i)
        vals.push_back({rc.grid.x(i), res.net(rc.grid.x(i))});
    write_csv(out_path(rc, "psi_theta.csv"), {"x", "psi_theta"}, vals);

    std::printf("prefit_steps=%d final_loss=%.6e final_rel_l2=%.6f\n", res.prefit_steps,
                res.history.back().mean_loss, res.history.back().rel_l2);
    return 0;
}

int cmd_evaluate(const RunConfig& rc, const std::string& x0_list, bool pi_zero,
                 int paths_override, double horizon_override) {
    std::vector<double> x0s = parse_reals("x0", x0_list);
    if (x0s.empty()) throw ParseError("evaluate: empty x0 list");

    SolveResult fd = solve_randomized(rc.spec, rc.lambda, rc.grid);
    auto gen = discretize_generator(rc.spec, rc.grid);
    GridFn psi0 = solve_feynman_kac(gen, rc.spec);
    QuadratureRule rule = make_rule_for(fd.psi);
    GibbsFactory jump_law = make_gibbs_factory(fd.psi, rc.spec, rc.lambda.lambda2, rule);
    GridFn jump_cost = jump_cost_field(fd.psi, rc.spec, rc.lambda.lambda2, rule);
    double value_sup = 0.0;
    for (double v : fd.psi.v) value_sup = std::max(value_sup, std::abs(v));

    std::vector<std::vector<double>> rows;
    for (double x0 : x0s) {
        SimConfig sim = rc.sim;
        sim.seed = rc.seed;
        sim.x0 = X0Sampler::point(x0);
        if (paths_override > 0) sim.batch = paths_override;
        if (horizon_override > 0.0) sim.horizon = horizon_override;
        CostEstimate est;
        if (pi_zero)
            est = evaluate_policy_cost(
                rc.spec, [](double) { return 0.0; }, jump_law, sim, rc.lambda, jump_cost,
                JumpEstimator::intensity_weighted, value_sup);
        else
            est = evaluate_policy_cost(rc.spec, fd.pi_star, jump_law, sim, rc.lambda, jump_cost,
                                       JumpEstimator::intensity_weighted, value_sup);
        double half = 1.959963984540054 * est.std_error;
        rows.push_back({x0, est.mean, est.std_error, est.mean - half, est.mean + half,
                        fd.psi.eval(x0), psi0.eval(x0)});
        std::printf("x0=%+.3f mc=%.6f +-%.6f fd=%.6f\n", x0, est.mean, half, fd.psi.eval(x0));
    }
    write_csv(out_path(rc, "evaluation.csv"),
              {"x0", "mc_value", "std_error", "ci_lo", "ci_hi", "fd_value", "fk_value"}, rows);
    return 0;
}

int cmd_sweep_lambda(const RunConfig& rc, const std::string& lambda_list) {
    std::vector<LambdaPair> lambdas = parse_lambdas(lambda_list);
    SweepReport rep = lambda_sweep(rc.spec, rc.grid, lambdas);
    std::vector<std::vector<double>> rows;
    bool any_failed = false;
    for (const auto& e : rep.entries) {
        if (!e.error.empty()) {
            std::printf("lambda=(%.4g,%.4g) failed: %s\n", e.lambda.lambda1, e.lambda.lambda2,
                        e.error.c_str());
            any_failed = true;
            continue;
        }
        rows.push_back({e.lambda.lambda1, e.lambda.lambda2, e.rel_l2_error, e.sup_error,
                        static_cast<double>(e.outer_iters), e.q_hat});
        std::printf("lambda=(%.4g,%.4g) rel_l2=%.6f sup=%.6f lower_bound=%s\n", e.lambda.lambda1,
                    e.lambda.lambda2, e.rel_l2_error, e.sup_error,
                    e.lower_bound_ok ? "ok" : "VIOLATED");
        any_failed = any_failed || !e.lower_bound_ok;
    }
    write_csv(out_path(rc, "sweep.csv"),
              {"lambda1", "lambda2", "rel_l2_error", "sup_error", "outer_iters", "q_hat"}, rows);
    return any_failed ? 2 : 0;
}

int cmd_sweep_sigma(const RunConfig& rc, const std::string& sigma_list) {
    std::vector<double> sigmas = parse_reals("sigma", sigma_list);
    if (sigmas.empty()) throw ParseError("sweep-sigma: empty sigma list");

    std::vector<std::vector<double>> summary;
    for (size_t si = 0; si < sigmas.size(); ++si) {
        double sigma = sigmas[si];
        ModelSpec spec = rc.spec;
        spec.volatility = Pwl::constant(sigma);
        spec.sigma0 = sigma;
        SolveResult sol = solve_randomized(spec, rc.lambda, rc.grid);

        char suffix[32];
        std::snprintf(suffix, sizeof suffix, "sigma_%zu", si);
        std::vector<std::vector<double>> rows;
        for (int i = 0; i < rc.grid.n; ++i)
            rows.push_back({rc.grid.x(i), sol.psi.v[i], sol.pi_star.v[i]});
        write_csv(out_path(rc, std::string("psi_") + suffix + ".csv"), {"x", "psi", "pi_star"},
                  rows);

        QuadratureRule rule = make_rule_for(sol.psi);
        JumpGibbs law(sol.psi, spec.jump_cost, 2.0, rc.lambda.lambda2, rule);
        std::vector<std::vector<double>> dens;
        for (int k = 0; k <= 400; ++k) {
            double xi = -12.0 + 24.0 * k / 400.0;
            dens.push_back({xi, law.density(xi)});
        }
        write_csv(out_path(rc, std::string("jump_density_x2_") + suffix + ".csv"),
                  {"xi", "density"}, dens);

        // flat region of the intensity: nodes below 5% of its maximum
        double pi_max = 0.0;
        for (double p : sol.pi_star.v) pi_max = std::max(pi_max, p);
        int below = 0;
        for (double p : sol.pi_star.v)
            if (p < 0.05 * pi_max) ++below;
        double width = below * rc.grid.h();

        summary.push_back({sigma, sol.psi(0.0), width, law.variance()});
        std::printf("sigma=%.3f psi(0)=%.6f flat_width=%.4f jump_var_x2=%.6f\n", sigma,
                    sol.psi(0.0), width, law.variance());
    }
    write_csv(out_path(rc, "sigma_sweep.csv"),
              {"sigma", "value_at_zero", "flat_region_width", "jump_variance_x2"}, summary);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CliArgs a;
    CLI::App app{"Randomized impulse control of 1-D diffusions"};
    app.require_subcommand(1);
    app.fallthrough();

    app.add_option("--config", a.config_path, "INI run configuration");
    auto* seed_opt = app.add_option("--seed", a.seed, "RNG seed override");
    auto* out_opt = app.add_option("--out-dir", a.out_dir, "output directory override");
    auto* l1_opt = app.add_option("--lambda1", a.lambda1, "intensity temperature override");
    auto* l2_opt = app.add_option("--lambda2", a.lambda2, "jump temperature override");

    app.add_subcommand("validate", "check model assumptions");
    app.add_subcommand("solve-fd", "randomized fixed-point solve");
    app.add_subcommand("solve-classical", "classical impulse-control solve");
    auto* sub_train = app.add_subcommand("train", "TD training run");
    sub_train->add_flag("--dry-run", a.dry_run, "print resolved config and exit");
    auto* sub_eval = app.add_subcommand("evaluate", "Monte Carlo policy evaluation");
    sub_eval->add_option("--x0", a.x0_list, "comma-separated start states");
    sub_eval->add_flag("--pi-zero", a.pi_zero, "evaluate the never-intervene policy");
    sub_eval->add_option("--paths", a.paths_override, "path count override");
    sub_eval->add_option("--horizon", a.horizon_override, "horizon override");
    auto* sub_slam = app.add_subcommand("sweep-lambda", "lambda convergence sweep");
    sub_slam->add_option("--lambdas", a.lambda_list, "comma-separated L1:L2 pairs");
    auto* sub_ssig = app.add_subcommand("sweep-sigma", "volatility sensitivity sweep");
    sub_ssig->add_option("--sigmas", a.sigma_list, "comma-separated volatilities");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 3;
    }
    a.seed_set = seed_opt->count() > 0;
    a.out_set = out_opt->count() > 0;
    a.l1_set = l1_opt->count() > 0;
    a.l2_set = l2_opt->count() > 0;

    try {
        RunConfig rc = resolve(a);
        if (app.got_subcommand("validate")) return cmd_validate(rc);
        if (app.got_subcommand("solve-fd")) return cmd_solve_fd(rc);
        if (app.got_subcommand("solve-classical")) return cmd_solve_classical(rc);
        if (app.got_subcommand("train")) return cmd_train(rc, a.dry_run);
        if (app.got_subcommand("evaluate"))
            return cmd_evaluate(rc, a.x0_list, a.pi_zero, a.paths_override, a.horizon_override);
        if (app.got_subcommand("sweep-lambda")) return cmd_sweep_lambda(rc, a.lambda_list);
        if (app.got_subcommand("sweep-sigma")) return cmd_sweep_sigma(rc, a.sigma_list);
        std::fprintf(stderr, "no subcommand\n");
        return 3;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (...) {
        std::fprintf(stderr, "error: unknown failure\n");
        return 2;
    }
}
