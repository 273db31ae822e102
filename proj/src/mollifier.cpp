#include "bsdelab/mollifier.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "bsdelab/csv.hpp"
#include "bsdelab/errors.hpp"
#include "bsdelab/rng.hpp"

namespace bsdelab {

namespace {

// Scratch buffers live on the stack; these bound the problem sizes handled by
// the mollifier.
constexpr std::size_t kMaxArgs = 64;
constexpr std::size_t kMaxDim = 16;

double raw_bump(double u) {
    const double a = 1.0 - u * u;
    return a > 0.0 ? std::exp(-1.0 / a) : 0.0;
}

// Composite Gauss-Legendre integral of the raw bump over [lo, hi].
double integrate_raw_bump(double lo, double hi, int panels) {
    static const KernelRule gl = gauss_legendre(20);
    const double h = (hi - lo) / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double a = lo + p * h;
        double s = 0.0;
        for (std::size_t j = 0; j < gl.nodes.size(); ++j) s += gl.weights[j] * raw_bump(a + 0.5 * h * (gl.nodes[j] + 1.0));
        total += 0.5 * h * s;
    }
    return total;
}

struct CdfTable {
    static constexpr int kCells = 4096;
    std::array<double, kCells + 1> values{};

    CdfTable() {
        const double norm = bump_normalizer();
        const double h = 2.0 / kCells;
        double acc = 0.0;
        values[0] = 0.0;
        for (int c = 0; c < kCells; ++c) {
            const double a = -1.0 + c * h;
            acc += integrate_raw_bump(a, a + h, 1);
            values[c + 1] = acc / norm;
        }
        values[kCells] = 1.0;
    }
};

}  // namespace

KernelRule gauss_legendre(int order) {
    if (order < 1) throw std::invalid_argument("quadrature order must be positive");
    const auto q = static_cast<Eigen::Index>(order);
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(q, q);
    for (Eigen::Index k = 1; k < q; ++k) {
        const double kk = static_cast<double>(k);
        const double beta = kk / std::sqrt(4.0 * kk * kk - 1.0);
        jacobi(k, k - 1) = beta;
        jacobi(k - 1, k) = beta;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
    KernelRule rule;
    rule.nodes.resize(order);
    rule.weights.resize(order);
    for (Eigen::Index k = 0; k < q; ++k) {
        rule.nodes[k] = eig.eigenvalues()(k);
        rule.weights[k] = 2.0 * eig.eigenvectors()(0, k) * eig.eigenvectors()(0, k);
    }
    // Exact reflection symmetry, so odd moments cancel.
    for (int k = 0; k < order / 2; ++k) {
        const int r = order - 1 - k;
        const double node = 0.5 * (rule.nodes[r] - rule.nodes[k]);
        const double weight = 0.5 * (rule.weights[r] + rule.weights[k]);
        rule.nodes[k] = -node;
        rule.nodes[r] = node;
        rule.weights[k] = rule.weights[r] = weight;
    }
    if (order % 2 == 1) rule.nodes[order / 2] = 0.0;
    return rule;
}

double bump_normalizer() {
    static const double value = integrate_raw_bump(-1.0, 1.0, 256);
    return value;
}

double bump_kernel(double u) { return raw_bump(u) / bump_normalizer(); }

double bump_cdf(double v) {
    if (v <= -1.0) return 0.0;
    if (v >= 1.0) return 1.0;
    static const CdfTable table;
    constexpr int cells = CdfTable::kCells;
    const double h = 2.0 / cells;
    const double pos = (v + 1.0) / h;
    const int c = std::min(static_cast<int>(pos), cells - 1);
    const double s = pos - c;
    const double a = -1.0 + c * h;
    // Cubic Hermite with the exact derivative (the kernel itself).
    const double f0 = table.values[c];
    const double f1 = table.values[c + 1];
    const double d0 = bump_kernel(a) * h;
    const double d1 = bump_kernel(a + h) * h;
    const double s2 = s * s;
    const double s3 = s2 * s;
    const double f = (2 * s3 - 3 * s2 + 1) * f0 + (s3 - 2 * s2 + s) * d0 + (-2 * s3 + 3 * s2) * f1 + (s3 - s2) * d1;
    return std::clamp(f, 0.0, 1.0);
}

std::vector<double> truncate(std::span<const double> x, double n) {
    std::vector<double> out(x.size());
    truncate_into(x, n, out);
    return out;
}

void truncate_into(std::span<const double> x, double n, std::span<double> out) {
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = std::clamp(x[j], -n, n);
}

double cutoff_of_squared_norm(double r2) {
    if (r2 <= 1.0) return 1.0;
    if (r2 >= 4.0) return 0.0;
    return 1.0 - bump_cdf(2.0 * (r2 - 1.0) / 3.0 - 1.0);
}

double cutoff(std::span<const double> w, double scale_n) {
    double r2 = 0.0;
    for (double v : w) r2 += (v / scale_n) * (v / scale_n);
    return cutoff_of_squared_norm(r2);
}

namespace {

// Gauss rule for the weight bump(u) on (-1, 1): recurrence coefficients by the
// discretized Stieltjes procedure on a composite Gauss-Legendre grid, then
// Golub-Welsch. The weight is even, so the diagonal of the Jacobi matrix is 0.
KernelRule bump_gauss_rule(int order) {
    static const KernelRule gl = gauss_legendre(20);
    constexpr int panels = 128;
    const double h = 2.0 / panels;
    std::vector<double> xs, ws;
    for (int p = 0; p < panels; ++p)
        for (std::size_t j = 0; j < gl.nodes.size(); ++j) {
            const double x = -1.0 + p * h + 0.5 * h * (gl.nodes[j] + 1.0);
            xs.push_back(x);
            ws.push_back(0.5 * h * gl.weights[j] * raw_bump(x));
        }
    double mass = 0.0;
    for (double w : ws) mass += w;
    for (auto& w : ws) w /= mass;

    const std::size_t K = xs.size();
    std::vector<double> q(K, 1.0), q_prev(K, 0.0), r(K);
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(order, order);
    double b = 0.0;
    for (int k = 0; k + 1 < order; ++k) {
        double norm = 0.0;
        for (std::size_t j = 0; j < K; ++j) {
            r[j] = xs[j] * q[j] - b * q_prev[j];
            norm += ws[j] * r[j] * r[j];
        }
        b = std::sqrt(norm);
        J(k, k + 1) = J(k + 1, k) = b;
        for (std::size_t j = 0; j < K; ++j) {
            q_prev[j] = q[j];
            q[j] = r[j] / b;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(J);
    KernelRule rule;
    rule.nodes.resize(order);
    rule.weights.resize(order);
    for (int j = 0; j < order; ++j) {
        rule.nodes[j] = eig.eigenvalues()(j);
        rule.weights[j] = eig.eigenvectors()(0, j) * eig.eigenvectors()(0, j);
    }
    // Exact mirror symmetry, so odd moments vanish to rounding.
    for (int j = 0; j < order / 2; ++j) {
        const int k = order - 1 - j;
        const double x = 0.5 * (rule.nodes[k] - rule.nodes[j]);
        const double w = 0.5 * (rule.weights[k] + rule.weights[j]);
        rule.nodes[j] = -x;
        rule.nodes[k] = x;
        rule.weights[j] = rule.weights[k] = w;
    }
    if (order % 2 == 1) rule.nodes[order / 2] = 0.0;
    double total = 0.0;
    for (double w : rule.weights) total += w;
    for (auto& w : rule.weights) w /= total;
    return rule;
}

}  // namespace

const KernelRule& kernel_rule(int quad_order) {
    if (quad_order < 2) throw std::invalid_argument("kernel quadrature needs at least 2 nodes");
    static std::mutex guard;
    static std::map<int, KernelRule> cache;
    std::lock_guard lock(guard);
    auto it = cache.find(quad_order);
    if (it == cache.end()) it = cache.emplace(quad_order, bump_gauss_rule(quad_order)).first;
    return it->second;
}

MollifiedGenerator::MollifiedGenerator(GeneratorSpec base, MollificationParams params)
    : base_(std::move(base)), params_(std::move(params)), rule_(&kernel_rule(params_.quad_order_Q)) {
    if (params_.index_n < 1) throw std::invalid_argument("mollification index n must be positive");
    if (params_.kernel_id != "bump") throw std::invalid_argument("unknown kernel id " + params_.kernel_id);
    const ArgLayout lay = base_.layout();
    if (lay.size() > kMaxArgs || lay.m > kMaxDim) throw DimensionError("problem too large for mollification");
    for (std::size_t i = 0; i < base_.terms.size(); ++i)
        for (const auto& term : base_.terms[i])
            if (term.depends_on.size() > kMaxQuadratureDimension)
                throw DimensionError("mollification of component " + std::to_string(i) + " needs a " +
                                     std::to_string(term.depends_on.size()) +
                                     "-dimensional quadrature (limit " +
                                     std::to_string(kMaxQuadratureDimension) + ")");
}

double MollifiedGenerator::smoothed(double t, std::span<const double> xt, std::span<const double> w,
                                    std::size_t i, std::span<double> scratch) const {
    const double inv_n = 1.0 / params_.index_n;
    const auto& nodes = rule_->nodes;
    const auto& weights = rule_->weights;
    const std::size_t Q = nodes.size();
    double total = 0.0;
    for (const auto& term : base_.terms[i]) {
        const auto& deps = term.depends_on;
        const std::size_t d = deps.size();
        if (d == 0) {
            total += term.fn(t, xt, w);
            continue;
        }
        std::copy(w.begin(), w.end(), scratch.begin());
        std::array<std::size_t, kMaxQuadratureDimension> idx{};
        double acc = 0.0;
        while (true) {
            double weight = 1.0;
            for (std::size_t a = 0; a < d; ++a) {
                scratch[deps[a]] = w[deps[a]] - nodes[idx[a]] * inv_n;
                weight *= weights[idx[a]];
            }
            acc += weight * term.fn(t, xt, scratch);
            std::size_t a = 0;
            while (a < d && ++idx[a] == Q) idx[a++] = 0;
            if (a == d) break;
        }
        total += acc;
    }
    return total;
}

void MollifiedGenerator::evaluate(double t, std::span<const double> x, std::span<const double> w,
                                  std::span<double> out) const {
    const double psi = cutoff(w, params_.index_n);
    if (psi == 0.0) {
        std::fill(out.begin(), out.begin() + static_cast<long>(base_.n_components), 0.0);
        return;
    }
    std::array<double, kMaxDim> xt{};
    std::array<double, kMaxArgs> scratch{};
    truncate_into(x, params_.index_n, std::span<double>(xt.data(), x.size()));
    const std::span<const double> xs(xt.data(), x.size());
    for (std::size_t i = 0; i < base_.n_components; ++i)
        out[i] = psi * smoothed(t, xs, w, i, std::span<double>(scratch.data(), w.size()));
}

double MollifiedGenerator::evaluate_component(double t, std::span<const double> x, std::span<const double> w,
                                              std::size_t i) const {
    const double psi = cutoff(w, params_.index_n);
    if (psi == 0.0) return 0.0;
    std::array<double, kMaxDim> xt{};
    std::array<double, kMaxArgs> scratch{};
    truncate_into(x, params_.index_n, std::span<double>(xt.data(), x.size()));
    return psi * smoothed(t, std::span<const double>(xt.data(), x.size()), w, i,
                          std::span<double>(scratch.data(), w.size()));
}

double mollify_eval(const MollifiedGenerator& gen, double t, std::span<const double> x,
                    std::span<const double> w, std::size_t i) {
    return gen.evaluate_component(t, x, w, i);
}

namespace {

void require_finite(double v, const char* what, int n) {
    if (!std::isfinite(v))
        throw ValidationError(std::string("certification: non-finite ") + what + " at n=" + std::to_string(n));
}

}  // namespace

PropertyReport certify_properties(const GeneratorSpec& gen_raw, std::span<const int> n_list,
                                  const CertifyOptions& options) {
    if (n_list.empty()) throw std::invalid_argument("n_list must not be empty");
    const ArgLayout lay = gen_raw.layout();
    const std::size_t m = lay.m;
    const std::size_t d = lay.size();
    const Philox4x32 rng(derive_key(options.seed, StreamDomain::certification));

    PropertyReport report;
    std::vector<double> x(m), xt(m), w(d), wp(d), dir(d);
    for (int n : n_list) {
        const MollifiedGenerator gen(gen_raw, {n, options.quad_order, "bump"});
        PropertyRow row;
        row.n = n;
        row.growth_margin = -std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < options.sample_count; ++s) {
            UniformStream u(rng, s);
            const double t = u.uniform(0.0, options.horizon);
            for (auto& v : x) v = u.uniform(-options.x_radius, options.x_radius);
            for (auto& v : w) v = u.uniform(-options.compact_K, options.compact_K);
            for (auto& v : dir) v = u.uniform(-1.0, 1.0);
            const double dn = std::max(euclidean_norm(dir), 1e-300);
            for (std::size_t j = 0; j < d; ++j) wp[j] = w[j] + options.fd_step * dir[j] / dn;
            truncate_into(x, n, xt);

            for (std::size_t i = 0; i < lay.n; ++i) {
                const double hn = gen.evaluate_component(t, x, w, i);
                const double hp = gen.evaluate_component(t, x, wp, i);
                const double h = gen_raw.evaluate(t, x, w, i);
                require_finite(hn, "mollified generator", n);
                require_finite(hp, "mollified generator", n);
                require_finite(h, "raw generator", n);
                row.lipschitz_hat = std::max(row.lipschitz_hat, std::abs(hp - hn) / options.fd_step);
                row.growth_margin = std::max(row.growth_margin, std::abs(hn) - gen_raw.growth_bound(xt, w, i));
                row.uniform_gap = std::max(row.uniform_gap, std::abs(hn - h));
                row.c_n = std::max(row.c_n, std::abs(hn));
            }

            // Property (c): the cutoff confines H_n to |w| <= 2n and x is clamped
            // to [-n, n]^m, so sampling that region bounds the global sup.
            for (auto& v : x) v = u.uniform(-(n + 1.0), n + 1.0);
            for (auto& v : w) v = u.uniform(-2.0 * n, 2.0 * n);
            for (std::size_t i = 0; i < lay.n; ++i) {
                const double hn = gen.evaluate_component(t, x, w, i);
                require_finite(hn, "mollified generator", n);
                row.c_n = std::max(row.c_n, std::abs(hn));
            }
        }
        report.rows.push_back(row);
    }
    return report;
}

void write_property_csv(const std::filesystem::path& file, const PropertyReport& report) {
    CsvWriter csv(file, {"n", "lipschitz_hat", "c_n", "growth_margin", "uniform_gap"});
    for (const auto& r : report.rows) csv.row({r.n, r.lipschitz_hat, r.c_n, r.growth_margin, r.uniform_gap});
}

}  // namespace bsdelab
