#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bsdelab/approximation.hpp"
#include "bsdelab/bsde_solver.hpp"
#include "bsdelab/forward_sde.hpp"

namespace bsdelab {

// Writes the integrand h(t_k) of path p into `out` (length m).
using IntegrandFn = std::function<void(std::size_t step, std::size_t path, std::span<double> out)>;

struct ExponentialMartingaleSample {
    std::vector<double> terminal;  // E_T per path
    std::string integrand;
    TimeGrid grid;

    double mean() const;
};

// Pathwise exp(sum h . dB - 0.5 sum |h|^2 dt). Any |h| above `bound` throws
// SimulationError with the offending step and path.
ExponentialMartingaleSample stochastic_exponential(const PathEnsemble& ensemble, const IntegrandFn& h, double bound,
                                                   std::string description = "");

struct MomentEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

// E[E_T^p0] with its jackknife standard error; p0 must lie in (1, 2).
MomentEstimate p0_moment(const ExponentialMartingaleSample& sample, double p0);

inline const std::vector<double> kDefaultP0Grid{1.1, 1.25, 1.5, 1.75, 1.9};

// Scalar problem y with driver C2 (1 + |phi_n(x)|) |z| + Ch (1 + |phi_n(x)|^gamma + |y|)
// and terminal sign * g^i, built from the problem's growth constants.
ProblemSpec dominating_problem(const ProblemSpec& problem, int n, std::size_t component, double sign = 1.0);
Solution solve_dominating_bsde(const ProblemSpec& problem, int n, const PathEnsemble& ensemble,
                               const SolverConfig& config, std::size_t component = 0, double sign = 1.0);

// h = C2 (1 + |phi_n(X)|) sign(zbar(t_k, X_k)) with sign(0) = 0 componentwise.
IntegrandFn dominating_integrand(const ProblemSpec& problem, int n, const ValueFields& dominating,
                                 const PathEnsemble& ensemble);

struct ComparisonRow {
    double t = 0.0;
    std::vector<double> x;
    double value = 0.0;   // y^i_n
    double upper = 0.0;   // ybar from terminal g^i
    double lower = 0.0;   // -ybar from terminal -g^i
    double violation = 0.0;  // max(value - upper, lower - value)
};

struct ComparisonResult {
    std::vector<ComparisonRow> rows;
    double max_violation = 0.0;
};

// Checks lower <= y^i_n <= upper at the probes; violations <= 0 mean the
// sandwich holds.
ComparisonResult comparison_check(const ValueFields& fields_n, std::size_t component, const ValueFields& upper,
                                  const ValueFields& lower, const std::vector<ProbePoint>& probes);

void write_moment_csv(const std::filesystem::path& file, const std::vector<int>& n_values,
                      const std::vector<std::vector<std::pair<double, MomentEstimate>>>& rows);
void write_comparison_csv(const std::filesystem::path& file, const ComparisonResult& result);

}  // namespace bsdelab
