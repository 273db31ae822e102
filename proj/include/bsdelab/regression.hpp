#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bsdelab {

enum class BasisKind { polynomial, piecewise_linear };

std::string to_string(BasisKind kind);
BasisKind basis_kind_from_string(const std::string& name);

struct BasisSpec {
    BasisKind kind = BasisKind::polynomial;
    // Total degree for polynomials, bins per dimension for piecewise linear.
    int degree_or_bins = 5;
    double ridge_lambda = 1e-8;
};

// A basis adapted to one cross-section of states: standardization, quantile
// knots and the hull used to clamp evaluations. A sample with no spread in
// any coordinate collapses to the constant basis.
class FittedBasis {
public:
    enum class Form { constant, polynomial, piecewise_linear };

    static FittedBasis fit(std::span<const double> features, std::size_t dim, const BasisSpec& spec);

    Form form() const { return form_; }
    std::size_t dim() const { return dim_; }
    std::size_t size() const { return size_; }
    // Upper bound on the nonzero entries of one evaluated row.
    std::size_t row_nonzeros() const { return nnz_; }
    const std::vector<double>& hull_lo() const { return lo_; }
    const std::vector<double>& hull_hi() const { return hi_; }

    // Sparse evaluation at x clamped to the hull. Writes exactly row_nonzeros()
    // entries (padding uses index 0 with value 0).
    void evaluate(std::span<const double> x, std::span<std::uint32_t> idx, std::span<double> val) const;
    void evaluate_dense(std::span<const double> x, std::span<double> out) const;
    double dot(const Eigen::VectorXd& coef, std::span<const double> x) const;

    std::string id() const;
    void write(std::ostream& out) const;
    static FittedBasis read(std::istream& in);

private:
    Form form_ = Form::constant;
    std::size_t dim_ = 1;
    std::size_t size_ = 1;
    std::size_t nnz_ = 1;
    int degree_ = 0;
    std::vector<double> lo_, hi_;
    std::vector<double> center_, scale_;
    std::vector<int> active_;
    // Polynomial: size_ x dim_ exponents, row-major.
    std::vector<int> exponents_;
    // Piecewise linear: knots per dimension and the first basis index per dimension.
    std::vector<std::vector<double>> knots_;
    std::vector<std::size_t> offset_;

    void finish_polynomial();
    void finish_piecewise();
};

// Ridge least squares on one cross-section, factorized once and reused for
// any number of targets.
class Projector {
public:
    Projector(FittedBasis basis, std::span<const double> features, double ridge, std::size_t workers);

    const FittedBasis& basis() const { return basis_; }
    std::size_t samples() const { return samples_; }
    // Throws SolverError when the design is rank deficient beyond ridge rescue.
    Eigen::VectorXd fit(std::span<const double> targets) const;
    void predict(const Eigen::VectorXd& coef, std::span<double> out) const;
    // Ratio of the largest to the smallest pivot of the regularized Gram matrix.
    double condition() const { return condition_; }

private:
    FittedBasis basis_;
    std::size_t samples_ = 0;
    std::size_t workers_ = 1;
    std::vector<std::uint32_t> idx_;
    std::vector<double> val_;
    Eigen::LDLT<Eigen::MatrixXd> ldlt_;
    double condition_ = 1.0;
};

struct RegressionResult {
    FittedBasis basis;
    Eigen::VectorXd coefficients;
};

// Estimator of E[target | X_{t_k} = features] as a basis expansion.
RegressionResult regress_conditional_expectation(std::span<const double> features, std::size_t dim,
                                                 std::span<const double> targets, const BasisSpec& basis,
                                                 std::size_t workers = 1);

}  // namespace bsdelab
