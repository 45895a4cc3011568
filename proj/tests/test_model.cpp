#include <catch2/catch_amalgamated.hpp>

#include "ripc/grid.hpp"
#include "ripc/model.hpp"
#include "testutil.hpp"

using namespace ripc;

namespace {
const ValidationCheck* find_check(const ValidationReport& rep, const std::string& name) {
    for (const auto& c : rep.checks)
        if (c.name == name) return &c;
    return nullptr;
}
} // namespace

TEST_CASE("benchmark default parameters") {
    ModelSpec s = benchmark_default();
    CHECK(s.b(0.0) == 0.03);
    CHECK(s.b(5.0) == 0.03);
    CHECK(s.sigma(-2.0) == 0.2);
    CHECK(s.r == 0.1);
    CHECK(s.l(0.0) == 2.0);
    CHECK(s.f(0.0) == 0.0);
    CHECK(s.f(-3.0) == 3.0);
    CHECK(s.f(3.0) == 3.0);
    CHECK(s.l(-4.0) == 4.0);
    CHECK(s.l(4.0) == 4.0);
    CHECK(s.jump_cost.K() == 2.0);
    CHECK(s.lip_b_sigma() == 0.0);
    CHECK(s.G() == 0.0);
    CHECK(s.lip_f() == 1.0);
    CHECK(s.lip_l() == 0.5);
    CHECK(s.slope_clamp() == Catch::Approx(10.0));
}

TEST_CASE("benchmark passes all assumption checks") {
    ModelSpec s = benchmark_default();
    ValidationReport rep = validate_assumptions(s);
    for (const auto& c : rep.checks) {
        INFO(c.name << " " << c.detail);
        CHECK(c.pass);
    }
    CHECK(rep.ok());
    auto* gap = find_check(rep, "r - G in (0, L_f/L_l)");
    REQUIRE(gap != nullptr);
    CHECK(gap->margin == Catch::Approx(0.1)); // r - G = 0.1, upper gap 1.9
    auto* growth = find_check(rep, "growth h - r k- > 0");
    REQUIRE(growth != nullptr);
    CHECK(growth->margin == Catch::Approx(0.95));
    // unbounded running cost is a warning, not a failure
    CHECK(rep.warnings.size() == 1);
}

TEST_CASE("discount at the excluded endpoint fails the gap check") {
    ModelSpec s = benchmark_default();
    s.r = 0.0;
    ValidationReport rep = validate_assumptions(s);
    auto* gap = find_check(rep, "r - G in (0, L_f/L_l)");
    REQUIRE(gap != nullptr);
    CHECK_FALSE(gap->pass);
    CHECK_FALSE(rep.ok());
}

TEST_CASE("degenerate volatility fails uniform ellipticity") {
    ModelSpec s = benchmark_default();
    s.volatility = Pwl::constant(0.0);
    s.sigma0 = 0.0;
    ValidationReport rep = validate_assumptions(s);
    auto* ell = find_check(rep, "uniform ellipticity sigma >= sigma0 > 0");
    REQUIRE(ell != nullptr);
    CHECK_FALSE(ell->pass);
}

TEST_CASE("validate_assumptions is pure") {
    ModelSpec s = benchmark_default();
    ValidationReport a = validate_assumptions(s);
    ValidationReport b = validate_assumptions(s);
    REQUIRE(a.checks.size() == b.checks.size());
    for (size_t i = 0; i < a.checks.size(); ++i) {
        CHECK(a.checks[i].name == b.checks[i].name);
        CHECK(a.checks[i].pass == b.checks[i].pass);
        CHECK(a.checks[i].margin == b.checks[i].margin);
        CHECK(a.checks[i].detail == b.checks[i].detail);
    }
    CHECK(a.warnings == b.warnings);
}

TEST_CASE("subadditivity margin on the deterministic pair grid") {
    ModelSpec s = benchmark_default();
    s.jump_cost = ImpulseCost(2.0, 3.0, 0.5, 0.7);
    double K = s.jump_cost.K();
    double worst = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 100; ++i)
        for (int j = 0; j < 100; ++j) {
            double x = -10.0 + 20.0 * i / 99.0;
            double y = -10.0 + 20.0 * j / 99.0;
            worst = std::min(worst, s.l(x) + s.l(y) - s.l(x + y) - K);
        }
    CHECK(worst >= -1e-12);
    ValidationReport rep = validate_assumptions(s);
    auto* sub = find_check(rep, "l subadditive with gap K");
    REQUIRE(sub != nullptr);
    CHECK(sub->pass);
}

TEST_CASE("piecewise-linear descriptor algebra") {
    auto aff = Pwl::affine(1.0, -2.0);
    CHECK(aff.eval(0.0) == 1.0);
    CHECK(aff.eval(3.0) == Catch::Approx(-5.0));
    CHECK(aff.lipschitz() == 2.0);
    CHECK_FALSE(aff.is_constant());

    auto c = Pwl::constant(4.0);
    CHECK(c.eval(-100.0) == 4.0);
    CHECK(c.is_constant());

    auto p = Pwl::points({-1.0, 0.0, 2.0}, {1.0, 0.0, 4.0});
    CHECK(p.eval(-0.5) == Catch::Approx(0.5));
    CHECK(p.eval(1.0) == Catch::Approx(2.0));
    CHECK(p.eval(-2.0) == Catch::Approx(2.0));  // left tail, slope -1
    CHECK(p.eval(3.0) == Catch::Approx(6.0));   // right tail, slope 2
    CHECK(p.lipschitz() == 2.0);
    CHECK(p.kinks().size() == 3);

    auto vee = Pwl::vee(1.0, 1.0);
    CHECK(vee.eval(-3.0) == 3.0);
    CHECK(vee.eval(3.0) == 3.0);
    CHECK(vee.eval(0.0) == 0.0);

    CHECK_THROWS_AS(Pwl::points({1.0, 0.0}, {0.0, 0.0}), InvalidSpec);
    CHECK_THROWS_AS(Pwl::points({0.0}, {0.0}), InvalidSpec);
    CHECK_THROWS_AS(Pwl::points({0.0, std::nan("")}, {0.0, 1.0}), InvalidSpec);
    CHECK_THROWS_AS(Pwl::constant(std::numeric_limits<double>::infinity()), InvalidSpec);
}

TEST_CASE("intervention cost evaluation") {
    ImpulseCost l(2.0, 3.0, 0.5, 0.7);
    CHECK(l.eval(1.0) == 2.5);
    CHECK(l.eval(-1.0) == 3.7);
    CHECK(l.eval(0.0) == 2.0);
    CHECK(l.K() == 2.0);
    CHECK(l.lipschitz() == 0.7);
    CHECK_THROWS_AS(ImpulseCost(std::nan(""), 1.0, 0.0, 0.0), InvalidSpec);
}

TEST_CASE("lambda pair requires strict positivity") {
    CHECK_THROWS_AS(LambdaPair(0.0, 1.0), InvalidSpec);
    CHECK_THROWS_AS(LambdaPair(1.0, -0.5), InvalidSpec);
    LambdaPair lp(0.5, 0.1);
    CHECK(lp.lambda1 == 0.5);
    CHECK(lp.lambda2 == 0.1);
}

TEST_CASE("running cost vanishes at the origin for the vee family") {
    testutil::TestRng rng(11);
    for (int t = 0; t < 20; ++t) {
        double p = rng.uniform(0.1, 4.0), h = rng.uniform(0.1, 4.0);
        auto f = Pwl::vee(p, h);
        CHECK(f.eval(0.0) == 0.0);
        CHECK(f.eval(1.0) == Catch::Approx(h));
        CHECK(f.eval(-1.0) == Catch::Approx(p));
    }
}

TEST_CASE("grid node symmetry and cell lookup") {
    auto g = Grid1D::make(-8.0, 8.0, 1601);
    CHECK(g.h() == Catch::Approx(0.01));
    CHECK(g.x(800) == 0.0);
    for (int i : {0, 1, 17, 400, 800}) CHECK(g.x(i) == -g.x(1600 - i));
    CHECK(g.cell(-100.0) == 0);
    CHECK(g.cell(100.0) == g.n - 2);
    CHECK_THROWS_AS(Grid1D::make(1.0, -1.0, 11), std::invalid_argument);
    CHECK_THROWS_AS(Grid1D::make(0.0, 1.0, 2), std::invalid_argument);
}

TEST_CASE("grid function interpolation and clamped continuation") {
    auto g = Grid1D::make(-2.0, 2.0, 5);
    GridFn fn(g, {4.0, 1.0, 0.0, 1.0, 4.0}, 2.5); // x^2 at nodes, clamp below slope 3
    CHECK(fn.eval(0.5) == Catch::Approx(0.5));    // chord between 0 and 1
    CHECK(fn.eval(1.0) == 1.0);
    // boundary slope is 3, clamped to 2.5
    CHECK(fn.eval(3.0) == Catch::Approx(4.0 + 2.5));
    CHECK(fn.eval(-3.0) == Catch::Approx(4.0 + 2.5));
    CHECK(fn.all_finite());
    CHECK(fn.kinks().size() == 5);
    CHECK_THROWS_AS(GridFn(g, {1.0, 2.0}), std::invalid_argument);

    GridFn nf(g, {0.0, 0.0, std::nan(""), 0.0, 0.0});
    CHECK_FALSE(nf.all_finite());
}
