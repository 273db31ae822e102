#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bsdelab/core_model.hpp"
#include "bsdelab/driver.hpp"

namespace bsdelab {

// Normalized bump c * exp(-1 / (1 - u^2)) on (-1, 1), zero elsewhere.
double bump_kernel(double u);
// Integral of the unnormalized bump over (-1, 1).
double bump_normalizer();
// Distribution function of the normalized bump: 0 at v <= -1, 1 at v >= 1.
double bump_cdf(double v);

// Componentwise clamp of x to [-n, n].
std::vector<double> truncate(std::span<const double> x, double n);
void truncate_into(std::span<const double> x, double n, std::span<double> out);

// Smooth radial cutoff of w / n: 1 when |w/n|^2 <= 1, 0 when |w/n|^2 >= 4,
// monotone in between (integrated bump ramp in the squared norm).
double cutoff(std::span<const double> w, double scale_n);
double cutoff_of_squared_norm(double scaled_sq_norm);

// Tensor factor of the discrete kernel: the Gauss rule for the bump weight on
// (-1, 1), exact for polynomials of degree 2Q - 1 against the kernel.
struct KernelRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
const KernelRule& kernel_rule(int quad_order);

// Gauss-Legendre nodes and weights on (-1, 1) via Golub-Welsch.
KernelRule gauss_legendre(int order);

struct MollificationParams {
    int index_n = 1;
    int quad_order_Q = 8;
    std::string kernel_id = "bump";
};

inline constexpr std::size_t kMaxQuadratureDimension = 6;

// Lipschitz approximation H_{in} of a raw generator: x truncated to [-n, n]^m,
// each term convolved in the w entries it depends on with the kernel scaled to
// radius 1/n, times the cutoff at scale n.
class MollifiedGenerator final : public Driver {
public:
    // Throws DimensionError when some term would need a quadrature over more
    // than kMaxQuadratureDimension entries.
    MollifiedGenerator(GeneratorSpec base, MollificationParams params);

    const GeneratorSpec& base() const { return base_; }
    const MollificationParams& params() const { return params_; }

    ArgLayout layout() const override { return base_.layout(); }
    void evaluate(double t, std::span<const double> x, std::span<const double> w,
                  std::span<double> out) const override;
    double evaluate_component(double t, std::span<const double> x, std::span<const double> w,
                              std::size_t i) const;

    // Filled by certification; empty until then.
    std::optional<double> sup_bound_cn;
    std::optional<double> lipschitz_hat;

private:
    double smoothed(double t, std::span<const double> xt, std::span<const double> w, std::size_t i,
                    std::span<double> scratch) const;

    GeneratorSpec base_;
    MollificationParams params_;
    const KernelRule* rule_;
};

double mollify_eval(const MollifiedGenerator& gen, double t, std::span<const double> x,
                    std::span<const double> w, std::size_t i);

struct CertifyOptions {
    double horizon = 1.0;
    // (y, z) entries sampled from [-compact_K, compact_K].
    double compact_K = 1.0;
    // x sampled from [-x_radius, x_radius]^m for properties (a), (b), (d).
    double x_radius = 1.0;
    std::size_t sample_count = 10000;
    std::uint64_t seed = 1;
    int quad_order = 8;
    double fd_step = 1e-4;
};

struct PropertyRow {
    int n = 0;
    double lipschitz_hat = 0.0;
    double c_n = 0.0;
    double growth_margin = 0.0;
    double uniform_gap = 0.0;
};

struct PropertyReport {
    std::vector<PropertyRow> rows;
};

// Sampled certificate of the approximation properties: (a) finite-difference
// Lipschitz estimate, (b) worst margin of the truncated growth bound, (c)
// sup of |H_n| over its support, (d) sup over the compact of |H_n - H|.
PropertyReport certify_properties(const GeneratorSpec& gen_raw, std::span<const int> n_list,
                                  const CertifyOptions& options);

// Columns: n, lipschitz_hat, c_n, growth_margin, uniform_gap.
void write_property_csv(const std::filesystem::path& file, const PropertyReport& report);

}  // namespace bsdelab
