#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bsdelab/bsde_solver.hpp"
#include "bsdelab/core_model.hpp"
#include "bsdelab/forward_sde.hpp"
#include "bsdelab/mollifier.hpp"

namespace bsdelab {

enum class PathPolicy { reuse, fresh };

struct ApproximationSchedule {
    std::vector<int> n_values{2, 4, 8, 16, 32};
    PathPolicy policy = PathPolicy::reuse;

    // Throws std::invalid_argument unless non-empty, positive and strictly increasing.
    void check() const;
};

struct ProbePoint {
    std::size_t node = 0;
    double t = 0.0;
    std::vector<double> x;
};

// `times` node indices snapped from {0, T/4, T/2, 3T/4, T}; at each, `states`
// points spanning the empirical mean +- 3 standard deviations (along the
// diagonal when m > 1), clamped to the sampled range at that node.
std::vector<ProbePoint> default_probes(const PathEnsemble& ensemble, std::size_t times = 5,
                                       std::size_t states = 21);

// values[p * n_components + i] = y^i at probe p.
std::vector<double> probe_values(const ValueFields& fields, const std::vector<ProbePoint>& probes);
// Max over probes of |a - b| for component i.
double probe_sup_gap(std::span<const double> a, std::span<const double> b, std::size_t components, std::size_t i);

struct GrowthFit {
    double c_hat = 0.0;
    double lambda_hat = 0.0;
    bool degenerate = false;
};

// Least squares of log|y^i(t_k, x)| on log(1 + |x|). Probes with |y| below
// 1e-12 are dropped; if none remain the fit is degenerate (0, 0).
GrowthFit growth_bound_fit(const ValueFields& fields, std::size_t k, const std::vector<std::vector<double>>& probe_xs,
                           std::size_t component = 0);

struct UniformEstimates {
    std::vector<double> y_moment;  // E[sup_k |y^i(t_k, X_k)|^alpha]
    std::vector<double> z_energy;  // E[sum_k |z^i(t_k, X_k)|^2 dt_k]
};

UniformEstimates uniform_estimates_check(const ValueFields& fields, const PathEnsemble& ensemble, double alpha);

// L2(dP x dt) distance between two z fields along the ensemble, per component.
std::vector<double> z_field_gap(const ValueFields& a, const ValueFields& b, const PathEnsemble& ensemble);

struct IdentificationResidual {
    double i1 = 0.0;  // E sum |H_n - H| dt at the n-solution, on {|Y| + |Z| < k}
    double i2 = 0.0;  // the same on the complement
    double i3 = 0.0;  // E sum |H(n-solution) - H(limit solution)| dt
    double total() const { return i1 + i2 + i3; }
};

// Components are summed. `limit` stands in for the limit solution.
IdentificationResidual driver_identification_residual(const ValueFields& fields_n, const ValueFields& limit,
                                                      const GeneratorSpec& raw, const MollifiedGenerator& mollified,
                                                      const PathEnsemble& ensemble, double truncation_k);

struct SchemeOptions {
    SolverConfig solver;
    int quad_order = 8;
    double tolerance = 1e-2;
    double alpha = 2.0;
    double truncation_k = 10.0;
    // Node and states used for the growth fit; empty states disable it.
    std::size_t growth_node = 0;
    std::vector<std::vector<double>> growth_states;
};

struct ScheduleEntry {
    int n = 0;
    std::vector<double> probe_values;
    SolutionStats stats;
    std::vector<GrowthFit> growth;  // per component
    UniformEstimates estimates;
    IdentificationResidual identification;
};

struct PairGap {
    int n_from = 0;
    int n_to = 0;
    std::vector<double> sup_gap;   // per component, over probes
    std::vector<double> z_l2_gap;  // per component, along the ensemble
    double max_gap() const;
};

struct ConvergenceReport {
    std::size_t components = 1;
    std::vector<ProbePoint> probes;
    std::vector<ScheduleEntry> entries;
    std::vector<PairGap> pairs;
    double tolerance = 1e-2;
    bool converged = false;
    // First n_to whose gap fell below tolerance, or 0.
    int converged_at = 0;
};

struct SchemeResult {
    ValueFields final_fields;
    std::vector<ValueFields> fields_by_n;
    ConvergenceReport report;
};

// Solves the mollified problem for every n of the schedule. With
// PathPolicy::reuse every n uses `ensemble`; with PathPolicy::fresh the n-th
// entry uses a new ensemble from seed ensemble.seed + index (same grid).
SchemeResult run_scheme(const ProblemSpec& problem, const ApproximationSchedule& schedule,
                        const SchemeOptions& options, const std::vector<ProbePoint>& probes,
                        const PathEnsemble& ensemble);

// CSV files: scheme_per_n.csv, scheme_pairs.csv, scheme_probes.csv, and the
// two-column gap_vs_n.dat.
void write_convergence_report(const ConvergenceReport& report, const std::filesystem::path& dir);

}  // namespace bsdelab
