#include <cmath>
#include <limits>

#include "doctest.h"

#include "bsdelab/catalogue.hpp"
#include "bsdelab/core_model.hpp"
#include "bsdelab/errors.hpp"

using namespace bsdelab;

namespace {

ProblemSpec trivial_problem() {
    ProblemSpec p;
    p.name = "trivial";
    p.diffusion = make_diffusion("identity", 1, {});
    p.generator = make_generator("zero", 1, 1, {});
    p.terminal = make_terminal("zero", 1, 1, {});
    p.start_x = {0.0};
    return p;
}

ValidationOptions small(std::size_t samples = 2000) {
    ValidationOptions o;
    o.sample_count = samples;
    o.seed = 42;
    return o;
}

}  // namespace

TEST_SUITE("core_model") {

TEST_CASE("constant coefficients pass every check") {
    const ValidationReport rep = validate_problem(trivial_problem(), small());
    CHECK(rep.passed());
    for (const auto& c : rep.checks) CHECK(c.worst_margin <= 1e-12);
}

TEST_CASE("unbounded sigma fails the boundedness check") {
    ProblemSpec p = trivial_problem();
    p.diffusion.id = "state";
    p.diffusion.sigma = [](double, std::span<const double> x, std::span<double> out) { out[0] = x[0]; };
    p.diffusion.lipschitz_C1 = 1.0;
    p.diffusion.bound_Csigma = 5.0;
    const ValidationReport rep = validate_problem(p, small());
    CHECK_FALSE(rep.passed());
    CHECK_FALSE(rep.check("sigma_bound").passed);
    CHECK(rep.check("sigma_bound").worst_margin > 0.0);
}

TEST_CASE("degenerate sigma fails ellipticity") {
    ProblemSpec p = trivial_problem();
    p.diffusion = make_diffusion("zero", 1, {});
    const ValidationReport rep = validate_problem(p, small());
    CHECK_FALSE(rep.check("ellipticity").passed);
}

TEST_CASE("generator growth violation is detected") {
    ProblemSpec p = trivial_problem();
    p.generator = make_generator("abs-z", 1, 1, {{"c", 2.0}, {"C2", 1.0}});
    const ValidationReport rep = validate_problem(p, small());
    CHECK_FALSE(rep.check("generator_growth").passed);
    CHECK(rep.check("terminal_growth").passed);
}

TEST_CASE("non-finite terminal raises a located validation error") {
    ProblemSpec p = trivial_problem();
    p.terminal.fn = [](std::span<const double> x, std::size_t) {
        return x[0] > 5.0 ? std::numeric_limits<double>::quiet_NaN() : 0.0;
    };
    try {
        validate_problem(p, small());
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("g") != std::string::npos);
    }
}

TEST_CASE("validation is deterministic and prefix-monotone") {
    const ProblemSpec p = make_scenario("stochastic-linear-growth-demo");
    const ValidationReport a = validate_problem(p, small(3000));
    const ValidationReport b = validate_problem(p, small(3000));
    const ValidationReport prefix = validate_problem(p, small(1000));
    REQUIRE(a.checks.size() == b.checks.size());
    for (std::size_t c = 0; c < a.checks.size(); ++c) {
        CHECK(a.checks[c].worst_margin == b.checks[c].worst_margin);
        CHECK(a.checks[c].worst_point == b.checks[c].worst_point);
        // the shorter run sees a prefix of the same sample stream
        CHECK(prefix.checks[c].worst_margin <= a.checks[c].worst_margin);
        CHECK(prefix.checks[c].passed >= a.checks[c].passed);
    }
}

TEST_CASE("continuity probes shrink with the perturbation") {
    const ValidationReport rep = validate_problem(make_scenario("stochastic-linear-growth-demo"), small());
    REQUIRE(rep.continuity.size() >= 2);
    for (std::size_t k = 1; k < rep.continuity.size(); ++k) {
        CHECK(rep.continuity[k].perturbation < rep.continuity[k - 1].perturbation);
        CHECK(rep.continuity[k].max_change <= rep.continuity[k - 1].max_change + 1e-12);
    }
}

TEST_CASE("every catalogue scenario passes validation") {
    for (const auto& name : scenario_names()) {
        CAPTURE(name);
        CHECK(validate_problem(make_scenario(name), small()).passed());
    }
}

TEST_CASE("inconsistent dimensions are rejected") {
    ProblemSpec p = trivial_problem();
    p.generator = make_generator("zero", 1, 2, {});
    CHECK_THROWS(p.check_consistency());
    ProblemSpec q = trivial_problem();
    q.start_t = 2.0;
    CHECK_THROWS(q.check_consistency());
    ProblemSpec r = trivial_problem();
    r.start_x = {0.0, 1.0};
    CHECK_THROWS_AS(r.check_consistency(), DimensionError);
}

TEST_CASE("catalogue ids and parameters are checked") {
    CHECK_THROWS_AS(make_diffusion("brownian", 1, {}), ConfigError);
    CHECK_THROWS_AS(make_generator("demo", 2, 1, {{"speed", 1.0}}), ConfigError);
    CHECK_THROWS_AS(make_scenario("nope"), ConfigError);
    for (const auto& id : generator_ids()) CHECK_NOTHROW(make_generator(id, 2, 1, {}));
    for (const auto& id : terminal_ids()) CHECK_NOTHROW(make_terminal(id, 2, 1, {}));
}

TEST_CASE("demo generator matches its formula") {
    const GeneratorSpec g = make_generator("demo", 2, 1, {});
    const std::vector<double> x{-1.5};
    const std::vector<double> w{0.3, -0.7, 0.2, -0.4};  // y1 y2 z1 z2
    CHECK(g.evaluate(0.0, x, w, 0) == doctest::Approx(2.5 * 0.2 + std::atan(-0.7)).epsilon(1e-14));
    CHECK(g.evaluate(0.0, x, w, 1) == doctest::Approx(2.5 * 0.4 + std::atan(0.3)).epsilon(1e-14));
}

}  // TEST_SUITE
