#include <cmath>

#include "doctest.h"

#include "bsdelab/approximation.hpp"
#include "bsdelab/catalogue.hpp"
#include "bsdelab/errors.hpp"
#include "bsdelab/girsanov.hpp"

using namespace bsdelab;

namespace {

PathEnsemble brownian(std::size_t paths, std::size_t steps, std::uint64_t seed) {
    return simulate(make_diffusion("identity", 1, {}), TimeGrid::uniform(1.0, steps), 0.0, std::vector<double>{0.0},
                    {paths, seed, 1});
}

IntegrandFn constant_h(double mu) {
    return [mu](std::size_t, std::size_t, std::span<double> out) { out[0] = mu; };
}

}  // namespace

TEST_SUITE("girsanov_tools") {

TEST_CASE("zero integrand gives the unit exponential") {
    const auto e = brownian(1000, 10, 1);
    const auto s = stochastic_exponential(e, constant_h(0.0), 1.0, "0");
    for (double v : s.terminal) CHECK(v == 1.0);
    for (double p0 : kDefaultP0Grid) {
        const MomentEstimate m = p0_moment(s, p0);
        CHECK(m.value == 1.0);
        CHECK(m.std_error == 0.0);
    }
}

TEST_CASE("constant integrand: martingale mean, log mean, lognormal moment") {
    const auto e = brownian(100000, 10, 2);
    for (double mu : {0.5, 1.0}) {
        const auto s = stochastic_exponential(e, constant_h(mu), 2.0);
        double mean = 0, sq = 0, logm = 0;
        for (double v : s.terminal) {
            CHECK(v > 0.0);
            mean += v;
            sq += v * v;
            logm += std::log(v);
        }
        const double P = static_cast<double>(s.terminal.size());
        mean /= P;
        const double se = std::sqrt((sq / P - mean * mean) / P);
        CHECK(std::abs(mean - 1.0) <= 3.0 * se);
        CHECK(s.mean() == doctest::Approx(mean).epsilon(1e-12));
        CHECK(logm / P == doctest::Approx(-0.5 * mu * mu).epsilon(0.02));
    }
    const auto s1 = stochastic_exponential(e, constant_h(1.0), 2.0);
    const MomentEstimate m = p0_moment(s1, 1.5);
    CHECK(m.value == doctest::Approx(std::exp(0.375)).epsilon(0.03));
    CHECK(m.std_error > 0.0);
    // L^p norms are non-decreasing in p
    double prev = 0.0;
    for (double p0 : kDefaultP0Grid) {
        const double norm = std::pow(p0_moment(s1, p0).value, 1.0 / p0);
        CHECK(norm >= prev);
        prev = norm;
    }
}

TEST_CASE("integrand bound and p0 range are enforced") {
    const auto e = brownian(100, 10, 3);
    const IntegrandFn h = [](std::size_t k, std::size_t p, std::span<double> out) { out[0] = (k == 4 && p == 17) ? 9.0 : 0.1; };
    try {
        stochastic_exponential(e, h, 1.0, "spike");
        FAIL("expected SimulationError");
    } catch (const SimulationError& err) {
        CHECK(err.step() == 4);
        CHECK(err.path() == 17);
    }
    const auto s = stochastic_exponential(e, constant_h(0.1), 1.0);
    CHECK_THROWS(p0_moment(s, 1.0));
    CHECK_THROWS(p0_moment(s, 2.0));
}

TEST_CASE("dominating problem with zero constants and terminal is zero") {
    const ProblemSpec p = make_scenario("zero");
    const auto e = brownian(2000, 10, 4);
    const Solution s = solve_dominating_bsde(p, 4, e, {});
    for (const auto& node : s.fields.nodes)
        for (const auto& c : node.y) CHECK(c.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dominating problem reduces to the scalar ODE y' = -(2 + y)") {
    // C2 = 0, gamma = 0, Ch = 1, g = 0: the driver is 1 + |x|^0 + |y| = 2 + |y|.
    ProblemSpec p = make_scenario("zero");
    p.generator = make_generator("zero", 2, 1, {{"Ch", 1.0}, {"gamma", 0.0}});
    const auto e = brownian(1000, 200, 5);
    const Solution s = solve_dominating_bsde(p, 3, e, {});
    const double y0 = evaluate_y(s.fields, 0, 0, std::vector<double>{0.0});
    CHECK(std::abs(y0 - 2.0 * (std::exp(1.0) - 1.0)) <= 2e-2);
    CHECK(s.stats.z_energy[0] <= 1e-12);
}

TEST_CASE("dominating field is nonnegative for nonnegative data") {
    const ProblemSpec p = make_scenario("quadratic-terminal");
    const auto e = brownian(5000, 20, 6);
    ProblemSpec q = p;
    q.generator = make_generator("zero", 1, 1, {{"C2", 0.5}, {"Ch", 0.5}});
    const Solution s = solve_dominating_bsde(q, 4, e, {});
    for (std::size_t k = 0; k <= 20; k += 5)
        for (double x : {-1.0, 0.0, 1.0}) CHECK(evaluate_y(s.fields, k, 0, std::vector<double>{x}) >= -1e-8);  // regression round-off
}

TEST_CASE("comparison: zero problem and linear test problem") {
    {
        const ProblemSpec p = make_scenario("zero");
        const auto e = brownian(2000, 10, 7);
        const RawDriver d(p.generator);
        const Solution s = solve_backward(p, d, e, {});
        const Solution up = solve_dominating_bsde(p, 2, e, {}, 0, 1.0);
        const Solution lo = solve_dominating_bsde(p, 2, e, {}, 0, -1.0);
        const ComparisonResult r = comparison_check(s.fields, 0, up.fields, lo.fields, default_probes(e));
        CHECK(r.max_violation <= 0.0);
    }
    {
        const ProblemSpec p = make_scenario("linear-1d");
        const auto e = brownian(20000, 20, 8);
        const MollifiedGenerator d(p.generator, {4, 6, "bump"});
        const Solution s = solve_backward(p, d, e, {});
        const Solution up = solve_dominating_bsde(p, 4, e, {}, 0, 1.0);
        const Solution lo = solve_dominating_bsde(p, 4, e, {}, 0, -1.0);
        const ComparisonResult r = comparison_check(s.fields, 0, up.fields, lo.fields, default_probes(e));
        CHECK(r.max_violation <= 2e-2);
        REQUIRE(r.rows.size() == default_probes(e).size());
        for (const auto& row : r.rows) CHECK(row.violation == doctest::Approx(std::max(row.value - row.upper, row.lower - row.value)));
    }
}

TEST_CASE("demo constants: dominating field growth and integrand") {
    const ProblemSpec p = make_scenario("stochastic-linear-growth-demo");
    const PathEnsemble e = simulate_dispersed(p.diffusion, TimeGrid::uniform(1.0, 20), std::vector<double>{0.0},
                                              120.0, {20000, 9, 1});
    const int n = 64;
    const Solution s = solve_dominating_bsde(p, n, e, {});
    std::vector<std::vector<double>> xs;
    for (double r : {10.0, 20.0, 40.0, 60.0}) {
        xs.push_back({r});
        xs.push_back({-r});
    }
    const GrowthFit fit = growth_bound_fit(s.fields, 0, xs, 0);
    MESSAGE("dominating growth fit: C_hat = " << fit.c_hat << ", lambda_hat = " << fit.lambda_hat);
    CHECK_FALSE(fit.degenerate);
    CHECK(std::isfinite(fit.c_hat));
    // polynomial growth within the a priori exponent p0 gamma / (p0 - 1) for p0 = 1.5
    CHECK(fit.lambda_hat > 0.0);
    CHECK(fit.lambda_hat <= 1.5 * p.generator.growth_gamma / 0.5);

    const PathEnsemble pe = simulate(p.diffusion, TimeGrid::uniform(1.0, 20), 0.0, p.start_x, {20000, 10, 1});
    const Solution sp = solve_dominating_bsde(p, 4, pe, {});
    const auto sample = stochastic_exponential(pe, dominating_integrand(p, 4, sp.fields, pe), 5.0 + 1e-12);
    const MomentEstimate m = p0_moment(sample, 1.5);
    CHECK(std::isfinite(m.value));
    CHECK(m.value >= 1.0 - 4 * m.std_error);
}

}  // TEST_SUITE
