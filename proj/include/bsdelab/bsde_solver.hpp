#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bsdelab/core_model.hpp"
#include "bsdelab/driver.hpp"
#include "bsdelab/forward_sde.hpp"
#include "bsdelab/regression.hpp"

namespace bsdelab {

// Basis expansions of y(t_k, .) and z(t_k, .) on every grid node.
struct NodeField {
    FittedBasis basis;
    std::vector<Eigen::VectorXd> y;  // one per component
    std::vector<Eigen::VectorXd> z;  // component-major, n * m columns; empty at the last node
};

struct ValueFields {
    std::size_t components = 1;
    std::size_t dim = 1;
    BasisSpec basis;
    TimeGrid grid;
    std::vector<NodeField> nodes;
};

struct FieldValue {
    std::vector<double> y;
    Eigen::MatrixXd z;  // components x dim
};

// The z field at the last node is not produced by the scheme; k = N reuses
// the z expansion of node N - 1. States outside the fitted hull are clamped.
FieldValue evaluate_fields(const ValueFields& fields, std::size_t k, std::span<const double> x);
double evaluate_y(const ValueFields& fields, std::size_t k, std::size_t i, std::span<const double> x);

struct SolverConfig {
    BasisSpec basis;
    double picard_tol = 1e-10;
    std::size_t picard_max = 100;
    std::size_t workers = 1;
    // Exponent of the running-supremum moment reported in SolutionStats.
    double alpha = 2.0;
};

struct SolutionStats {
    std::vector<std::size_t> picard_iterations;  // per step k
    std::vector<std::vector<double>> picard_history;  // sup residual per iteration, per step k
    double max_picard_residual = 0.0;
    std::vector<double> condition;  // regression Gram condition per node
    std::vector<double> y_moment;   // E[sup_k |Y^i|^alpha]
    std::vector<double> z_energy;   // E[sum_k |Z^i|^2 dt]
};

struct Solution {
    ValueFields fields;
    SolutionStats stats;
};

// Backward regression scheme, explicit in Z and implicit in Y, with a joint
// Picard loop over all components at each step.
Solution solve_backward(const ProblemSpec& problem, const Driver& driver, const PathEnsemble& ensemble,
                        const SolverConfig& config);

// Text format:
//   bsdelab-fields 1
//   components <n> dim <m>
//   basis-spec <kind> <degree_or_bins> <ridge>
//   grid <count> <t_0> ... <t_N>
//   then per node: "node <k>", the basis record, "y <i> <size> <coef...>"
//   for each component, "z <i> <j> <size> <coef...>" for each column, "end".
void write_fields(const ValueFields& fields, std::ostream& out);
ValueFields read_fields(std::istream& in);
void save_fields(const ValueFields& fields, const std::filesystem::path& file);
ValueFields load_fields(const std::filesystem::path& file);

}  // namespace bsdelab
