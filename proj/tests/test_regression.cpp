#include <cmath>
#include <sstream>

#include "doctest.h"

#include "bsdelab/catalogue.hpp"
#include "bsdelab/errors.hpp"
#include "bsdelab/forward_sde.hpp"
#include "bsdelab/regression.hpp"
#include "gen.hpp"

using namespace bsdelab;

namespace {

std::vector<double> normal_sample(std::size_t n, std::uint64_t seed, double scale = 1.0) {
    testgen::Gen g(seed);
    std::vector<double> v(n);
    for (auto& e : v) e = scale * g.normal();
    return v;
}

}  // namespace

TEST_SUITE("regression") {

TEST_CASE("zero targets give zero coefficients") {
    const auto x = normal_sample(500, 1);
    const std::vector<double> y(500, 0.0);
    for (BasisKind kind : {BasisKind::polynomial, BasisKind::piecewise_linear}) {
        const RegressionResult r = regress_conditional_expectation(x, 1, y, {kind, 5, 1e-8});
        CHECK(r.coefficients.cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("a basis function is recovered as a unit vector") {
    const auto x = normal_sample(2000, 2);
    const BasisSpec spec{BasisKind::polynomial, 4, 1e-12};
    const FittedBasis basis = FittedBasis::fit(x, 1, spec);
    for (std::size_t j = 0; j < basis.size(); ++j) {
        std::vector<double> y(x.size()), row(basis.size());
        for (std::size_t p = 0; p < x.size(); ++p) {
            basis.evaluate_dense(std::span(x).subspan(p, 1), row);
            y[p] = row[j];
        }
        const RegressionResult r = regress_conditional_expectation(x, 1, y, spec);
        for (std::size_t c = 0; c < basis.size(); ++c) CHECK(std::abs(r.coefficients(c) - (c == j ? 1.0 : 0.0)) <= 1e-10);
        // the default ridge perturbs the fit at its own scale
        const RegressionResult d = regress_conditional_expectation(x, 1, y, {BasisKind::polynomial, 4, 1e-8});
        for (std::size_t c = 0; c < basis.size(); ++c) CHECK(std::abs(d.coefficients(c) - (c == j ? 1.0 : 0.0)) <= 1e-7);
    }
}

TEST_CASE("conditional expectation of a martingale is the identity") {
    const TimeGrid g = TimeGrid::uniform(1.0, 2);
    const PathEnsemble e = simulate(make_diffusion("identity", 1, {}), g, 0.0, std::vector<double>{0.0}, {100000, 8, 1});
    const auto feats = e.node_states(1);
    const auto targets = e.node_states(2);
    const RegressionResult r =
        regress_conditional_expectation(feats, 1, std::vector<double>(targets.begin(), targets.end()), {});
    const double up = r.basis.dot(r.coefficients, std::vector<double>{1.0});
    const double dn = r.basis.dot(r.coefficients, std::vector<double>{-1.0});
    CHECK((up - dn) / 2.0 == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("rank deficiency and undersized samples are errors") {
    std::vector<double> x(100);
    for (std::size_t p = 0; p < x.size(); ++p) x[p] = p % 2 ? 1.0 : -1.0;
    const std::vector<double> y(x.size(), 1.0);
    CHECK_THROWS_AS(regress_conditional_expectation(x, 1, y, {BasisKind::polynomial, 5, 0.0}), SolverError);
    const auto few = normal_sample(4, 3);
    CHECK_THROWS_AS(regress_conditional_expectation(few, 1, std::vector<double>(4, 0.0), {}), std::invalid_argument);
}

TEST_CASE("constant features collapse to the constant basis") {
    const std::vector<double> x(50, 0.3), y(50, 2.0);
    const RegressionResult r = regress_conditional_expectation(x, 1, y, {});
    CHECK(r.basis.form() == FittedBasis::Form::constant);
    CHECK(r.basis.dot(r.coefficients, std::vector<double>{5.0}) == doctest::Approx(2.0));
}

TEST_CASE("basis functions are independent on generic samples") {
    testgen::Gen gen(21);
    for (int c = 0; c < 40; ++c) {
        const std::size_t dim = static_cast<std::size_t>(gen.integer(1, 3));
        const BasisKind kind = gen.integer(0, 1) ? BasisKind::polynomial : BasisKind::piecewise_linear;
        const int deg = gen.integer(1, kind == BasisKind::polynomial ? 6 : 12);
        const std::size_t P = 3000;
        std::vector<double> x(P * dim);
        for (auto& v : x) v = gen.uniform(-3, 3) + 0.3 * gen.normal();
        const FittedBasis basis = FittedBasis::fit(x, dim, {kind, deg, 0.0});
        CAPTURE(dim);
        CAPTURE(deg);
        CHECK_NOTHROW(Projector(basis, x, 0.0, 1));
    }
}

TEST_CASE("piecewise linear basis reproduces linear targets") {
    const auto x = normal_sample(5000, 4);
    std::vector<double> y(x.size());
    for (std::size_t p = 0; p < x.size(); ++p) y[p] = 2.0 * x[p] - 1.0;
    const RegressionResult r = regress_conditional_expectation(x, 1, y, {BasisKind::piecewise_linear, 20, 1e-10});
    for (double v : {-1.5, 0.0, 0.7, 2.0}) CHECK(std::abs(r.basis.dot(r.coefficients, std::vector<double>{v}) - (2 * v - 1)) <= 1e-6);
}

TEST_CASE("evaluation is clamped to the hull") {
    const auto x = normal_sample(3000, 5);
    std::vector<double> y(x.size());
    for (std::size_t p = 0; p < x.size(); ++p) y[p] = x[p] * x[p];
    for (BasisKind kind : {BasisKind::polynomial, BasisKind::piecewise_linear}) {
        const RegressionResult r = regress_conditional_expectation(x, 1, y, {kind, 6, 1e-8});
        const double hi = r.basis.hull_hi()[0];
        const double lo = r.basis.hull_lo()[0];
        CHECK(r.basis.dot(r.coefficients, std::vector<double>{hi}) == r.basis.dot(r.coefficients, std::vector<double>{hi + 10}));
        CHECK(r.basis.dot(r.coefficients, std::vector<double>{lo}) == r.basis.dot(r.coefficients, std::vector<double>{lo - 3}));
    }
}

TEST_CASE("fits are independent of the worker count") {
    const auto x = normal_sample(3 * 20000, 6);
    std::vector<double> y(20000);
    for (std::size_t p = 0; p < y.size(); ++p) y[p] = std::sin(x[3 * p]) + x[3 * p + 1] * x[3 * p + 2];
    const BasisSpec spec{BasisKind::polynomial, 4, 1e-8};
    const auto a = regress_conditional_expectation(x, 3, y, spec, 1);
    const auto b = regress_conditional_expectation(x, 3, y, spec, 4);
    CHECK(a.coefficients == b.coefficients);
}

TEST_CASE("basis text round trip") {
    const auto x = normal_sample(2 * 1000, 7);
    for (BasisKind kind : {BasisKind::polynomial, BasisKind::piecewise_linear}) {
        const FittedBasis basis = FittedBasis::fit(x, 2, {kind, 5, 1e-8});
        std::stringstream ss;
        basis.write(ss);
        const FittedBasis back = FittedBasis::read(ss);
        CHECK(back.id() == basis.id());
        std::vector<double> a(basis.size()), b(basis.size());
        basis.evaluate_dense(std::vector<double>{0.3, -1.2}, a);
        back.evaluate_dense(std::vector<double>{0.3, -1.2}, b);
        CHECK(a == b);
    }
}

TEST_CASE("basis kind names") {
    CHECK(to_string(BasisKind::polynomial) == "poly");
    CHECK(basis_kind_from_string("pwlinear") == BasisKind::piecewise_linear);
    CHECK_THROWS(basis_kind_from_string("spline"));
}

}  // TEST_SUITE
