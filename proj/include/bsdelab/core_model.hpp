#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bsdelab {

// Writes sigma(t, x) into `out`, an m x m matrix in row-major order.
using SigmaFn = std::function<void(double t, std::span<const double> x, std::span<double> out)>;

struct DiffusionSpec {
    std::string id;
    std::size_t dim_m = 1;
    SigmaFn sigma;
    double lipschitz_C1 = 0.0;
    double bound_Csigma = 0.0;
    double ellipticity_eps = 1.0;

    Eigen::MatrixXd matrix(double t, std::span<const double> x) const;
};

// Layout of the flattened backward argument w = (y^1..y^n, z^1..z^n) where
// each z^i is a row of length m.
struct ArgLayout {
    std::size_t n = 1;
    std::size_t m = 1;

    std::size_t size() const { return n + n * m; }
    std::size_t y(std::size_t i) const { return i; }
    std::size_t z(std::size_t i, std::size_t j) const { return n + i * m + j; }
};

using TermFn = std::function<double(double t, std::span<const double> x, std::span<const double> w)>;

// One additive piece of a generator component. `depends_on` lists the entries
// of w the piece actually reads; mollification only integrates over those.
struct GeneratorTerm {
    TermFn fn;
    std::vector<std::size_t> depends_on;
};

struct GeneratorSpec {
    std::string id;
    std::size_t n_components = 1;
    std::size_t dim_m = 1;
    // terms[i] sums to H_i.
    std::vector<std::vector<GeneratorTerm>> terms;
    double growth_C2 = 0.0;
    double growth_Ch = 0.0;
    double growth_gamma = 1.0;

    ArgLayout layout() const { return {n_components, dim_m}; }
    double evaluate(double t, std::span<const double> x, std::span<const double> w, std::size_t i) const;
    // Right-hand side of the stochastic-linear-growth bound at (x, w) for component i.
    double growth_bound(std::span<const double> x, std::span<const double> w, std::size_t i) const;
    // Every index of w; used for terms whose dependence is not declared.
    std::vector<std::size_t> all_arguments() const;
};

struct TerminalSpec {
    std::string id;
    std::function<double(std::span<const double> x, std::size_t i)> fn;
    double growth_Cg = 0.0;
    double growth_gamma = 0.0;

    double evaluate(std::span<const double> x, std::size_t i) const { return fn(x, i); }
};

struct ProblemSpec {
    std::string name;
    DiffusionSpec diffusion;
    GeneratorSpec generator;
    TerminalSpec terminal;
    double horizon_T = 1.0;
    std::vector<double> start_x;
    double start_t = 0.0;

    std::size_t dim() const { return diffusion.dim_m; }
    std::size_t components() const { return generator.n_components; }
    // Throws DimensionError / std::invalid_argument on inconsistent members.
    void check_consistency() const;
};

double euclidean_norm(std::span<const double> v);

struct ValidationOptions {
    std::size_t sample_count = 10000;
    std::uint64_t seed = 1;
    double box_radius = 10.0;
    double tolerance = 1e-12;
};

struct AssumptionCheck {
    std::string name;
    double worst_margin = 0.0;
    bool passed = true;
    std::string worst_point;
};

// Sampled modulus of continuity of H in (y, z) at one perturbation size.
struct ContinuityProbe {
    double perturbation = 0.0;
    double max_change = 0.0;
};

struct ValidationReport {
    std::vector<AssumptionCheck> checks;
    std::vector<ContinuityProbe> continuity;

    bool passed() const;
    const AssumptionCheck& check(const std::string& name) const;
};

// Falsification of the standing assumptions by uniform sampling over
// [0,T] x [-R,R]^m (and [-R,R] for every y/z entry). Deterministic in
// (spec, sample_count, seed); sample s always uses the same draws.
ValidationReport validate_problem(const ProblemSpec& spec, const ValidationOptions& options);

}  // namespace bsdelab
