#include "bsdelab/regression.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "bsdelab/errors.hpp"
#include "bsdelab/parallel.hpp"

namespace bsdelab {

std::string to_string(BasisKind kind) {
    return kind == BasisKind::polynomial ? "poly" : "pwlinear";
}

BasisKind basis_kind_from_string(const std::string& name) {
    if (name == "poly" || name == "polynomial") return BasisKind::polynomial;
    if (name == "pwlinear" || name == "piecewise_linear") return BasisKind::piecewise_linear;
    throw std::invalid_argument("unknown basis kind '" + name + "'");
}

namespace {

constexpr double kSpreadTol = 1e-12;
constexpr int kMaxDegree = 12;
constexpr std::size_t kMaxHermite = 16;

// Probabilists' Hermite polynomials scaled to unit norm under N(0, 1).
void hermite_values(double u, int degree, double* out) {
    out[0] = 1.0;
    if (degree >= 1) out[1] = u;
    for (int k = 1; k < degree; ++k) out[k + 1] = u * out[k] - k * out[k - 1];
    double f = 1.0;
    for (int k = 2; k <= degree; ++k) {
        f *= k;
        out[k] /= std::sqrt(f);
    }
}

void enumerate_exponents(const std::vector<int>& active, int degree, std::size_t dim, std::vector<int>& out) {
    // Graded order: all tuples of total degree 0, then 1, ...
    const std::size_t a = active.size();
    std::vector<int> cur(a, 0);
    for (int total = 0; total <= degree; ++total) {
        // Enumerate compositions of `total` into a parts, lexicographic.
        std::function<void(std::size_t, int)> rec = [&](std::size_t pos, int left) {
            if (pos + 1 == a) {
                cur[pos] = left;
                for (std::size_t d = 0; d < dim; ++d) out.push_back(0);
                for (std::size_t q = 0; q < a; ++q) out[out.size() - dim + static_cast<std::size_t>(active[q])] = cur[q];
                return;
            }
            for (int v = left; v >= 0; --v) {
                cur[pos] = v;
                rec(pos + 1, left - v);
            }
        };
        rec(0, total);
    }
}

}  // namespace

FittedBasis FittedBasis::fit(std::span<const double> features, std::size_t dim, const BasisSpec& spec) {
    if (dim == 0 || features.size() % dim != 0) throw DimensionError("feature array does not match dimension");
    const std::size_t P = features.size() / dim;
    if (P == 0) throw std::invalid_argument("cannot fit a basis on an empty sample");
    if (spec.degree_or_bins < 1) throw std::invalid_argument("basis degree/bins must be positive");
    if (spec.kind == BasisKind::polynomial && spec.degree_or_bins > kMaxDegree)
        throw std::invalid_argument("polynomial degree above " + std::to_string(kMaxDegree));
    if (dim > kMaxHermite) throw DimensionError("regression features limited to 16 dimensions");

    FittedBasis b;
    b.dim_ = dim;
    b.lo_.assign(dim, std::numeric_limits<double>::infinity());
    b.hi_.assign(dim, -std::numeric_limits<double>::infinity());
    b.center_.assign(dim, 0.0);
    b.scale_.assign(dim, 1.0);
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t j = 0; j < dim; ++j) {
            const double v = features[p * dim + j];
            b.lo_[j] = std::min(b.lo_[j], v);
            b.hi_[j] = std::max(b.hi_[j], v);
        }
    for (std::size_t j = 0; j < dim; ++j)
        if (b.hi_[j] - b.lo_[j] > kSpreadTol * (1.0 + std::abs(b.lo_[j]))) b.active_.push_back(static_cast<int>(j));

    if (b.active_.empty()) {
        b.form_ = Form::constant;
        b.size_ = b.nnz_ = 1;
        return b;
    }

    if (spec.kind == BasisKind::polynomial) {
        b.form_ = Form::polynomial;
        b.degree_ = spec.degree_or_bins;
        for (int j : b.active_) {
            double s = 0.0;
            for (std::size_t p = 0; p < P; ++p) s += features[p * dim + j];
            const double mean = s / P;
            double v = 0.0;
            for (std::size_t p = 0; p < P; ++p) v += (features[p * dim + j] - mean) * (features[p * dim + j] - mean);
            b.center_[j] = mean;
            b.scale_[j] = std::sqrt(v / P);
            if (!(b.scale_[j] > 0.0)) b.scale_[j] = 1.0;
        }
        b.finish_polynomial();
    } else {
        b.form_ = Form::piecewise_linear;
        b.knots_.assign(dim, {});
        std::vector<double> col(P);
        const int bins = spec.degree_or_bins;
        for (int j : b.active_) {
            for (std::size_t p = 0; p < P; ++p) col[p] = features[p * dim + j];
            std::sort(col.begin(), col.end());
            auto& kn = b.knots_[j];
            for (int l = 0; l <= bins; ++l) {
                const auto pos = static_cast<std::size_t>(std::floor(static_cast<double>(l) * (P - 1) / bins));
                const double q = col[pos];
                if (kn.empty() || q > kn.back() + kSpreadTol * (1.0 + std::abs(kn.back()))) kn.push_back(q);
            }
            if (kn.back() < col.back()) kn.back() = col.back();
        }
        b.finish_piecewise();
    }
    return b;
}

void FittedBasis::finish_polynomial() {
    exponents_.clear();
    enumerate_exponents(active_, degree_, dim_, exponents_);
    size_ = nnz_ = exponents_.size() / dim_;
}

void FittedBasis::finish_piecewise() {
    offset_.assign(dim_, 0);
    if (dim_ == 1) {
        size_ = knots_[0].size();
        nnz_ = 2;
        return;
    }
    std::size_t next = 1;
    for (int j : active_) {
        offset_[j] = next;
        next += knots_[j].size() - 1;
    }
    size_ = next;
    nnz_ = 1 + 2 * active_.size();
}

void FittedBasis::evaluate(std::span<const double> x, std::span<std::uint32_t> idx, std::span<double> val) const {
    switch (form_) {
    case Form::constant:
        idx[0] = 0;
        val[0] = 1.0;
        return;
    case Form::polynomial: {
        double herm[kMaxHermite][kMaxDegree + 1];
        for (int j : active_) {
            const double xc = std::clamp(x[j], lo_[j], hi_[j]);
            hermite_values((xc - center_[j]) / scale_[j], degree_, herm[j]);
        }
        for (std::size_t r = 0; r < size_; ++r) {
            double v = 1.0;
            for (int j : active_) v *= herm[j][exponents_[r * dim_ + j]];
            idx[r] = static_cast<std::uint32_t>(r);
            val[r] = v;
        }
        return;
    }
    case Form::piecewise_linear: {
        std::size_t slot = 0;
        if (dim_ > 1) {
            idx[slot] = 0;
            val[slot++] = 1.0;
        }
        for (int j : active_) {
            const auto& kn = knots_[j];
            const double xc = std::clamp(x[j], kn.front(), kn.back());
            std::size_t c = static_cast<std::size_t>(std::upper_bound(kn.begin(), kn.end(), xc) - kn.begin());
            c = std::clamp<std::size_t>(c, 1, kn.size() - 1) - 1;
            const double s = (xc - kn[c]) / (kn[c + 1] - kn[c]);
            // Global index of hat h in dimension j; in several dimensions the
            // first hat of each dimension is dropped (the hats sum to one).
            auto put = [&](std::size_t h, double v) {
                if (dim_ == 1) {
                    idx[slot] = static_cast<std::uint32_t>(h);
                    val[slot++] = v;
                } else if (h == 0) {
                    idx[slot] = 0;
                    val[slot++] = 0.0;
                } else {
                    idx[slot] = static_cast<std::uint32_t>(offset_[j] + h - 1);
                    val[slot++] = v;
                }
            };
            put(c, 1.0 - s);
            put(c + 1, s);
        }
        return;
    }
    }
}

void FittedBasis::evaluate_dense(std::span<const double> x, std::span<double> out) const {
    std::vector<std::uint32_t> idx(nnz_);
    std::vector<double> val(nnz_);
    evaluate(x, idx, val);
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t r = 0; r < nnz_; ++r) out[idx[r]] += val[r];
}

double FittedBasis::dot(const Eigen::VectorXd& coef, std::span<const double> x) const {
    thread_local std::vector<std::uint32_t> idx;
    thread_local std::vector<double> val;
    idx.resize(nnz_);
    val.resize(nnz_);
    evaluate(x, idx, val);
    double s = 0.0;
    for (std::size_t r = 0; r < nnz_; ++r) s += coef[idx[r]] * val[r];
    return s;
}

std::string FittedBasis::id() const {
    switch (form_) {
    case Form::constant: return "const";
    case Form::polynomial: return "poly" + std::to_string(degree_);
    case Form::piecewise_linear: {
        std::size_t k = 0;
        for (const auto& kn : knots_) k = std::max(k, kn.size());
        return "pwlinear" + std::to_string(k > 0 ? k - 1 : 0);
    }
    }
    return "unknown";
}

namespace {

void write_vec(std::ostream& out, const char* tag, const std::vector<double>& v) {
    char buf[32];
    out << tag << ' ' << v.size();
    for (double x : v) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        out << ' ' << buf;
    }
    out << '\n';
}

std::vector<double> read_vec(std::istream& in, const char* tag) {
    std::string t;
    std::size_t n = 0;
    if (!(in >> t >> n) || t != tag) throw DataError(std::string("expected '") + tag + "' in field file");
    std::vector<double> v(n);
    for (auto& x : v)
        if (!(in >> x)) throw DataError(std::string("truncated '") + tag + "' record");
    return v;
}

}  // namespace

void FittedBasis::write(std::ostream& out) const {
    const char* form = form_ == Form::constant ? "const" : form_ == Form::polynomial ? "poly" : "pwlinear";
    out << "basis " << form << ' ' << dim_ << ' ' << degree_ << '\n';
    write_vec(out, "lo", lo_);
    write_vec(out, "hi", hi_);
    write_vec(out, "center", center_);
    write_vec(out, "scale", scale_);
    out << "active " << active_.size();
    for (int j : active_) out << ' ' << j;
    out << '\n';
    if (form_ == Form::piecewise_linear)
        for (std::size_t j = 0; j < dim_; ++j) write_vec(out, "knots", knots_[j]);
}

FittedBasis FittedBasis::read(std::istream& in) {
    std::string tag, form;
    FittedBasis b;
    if (!(in >> tag >> form >> b.dim_ >> b.degree_) || tag != "basis") throw DataError("expected basis record");
    b.lo_ = read_vec(in, "lo");
    b.hi_ = read_vec(in, "hi");
    b.center_ = read_vec(in, "center");
    b.scale_ = read_vec(in, "scale");
    std::size_t na = 0;
    if (!(in >> tag >> na) || tag != "active") throw DataError("expected active record");
    b.active_.resize(na);
    for (auto& j : b.active_) in >> j;
    if (form == "const") {
        b.form_ = Form::constant;
        b.size_ = b.nnz_ = 1;
    } else if (form == "poly") {
        b.form_ = Form::polynomial;
        b.finish_polynomial();
    } else if (form == "pwlinear") {
        b.form_ = Form::piecewise_linear;
        b.knots_.resize(b.dim_);
        for (std::size_t j = 0; j < b.dim_; ++j) b.knots_[j] = read_vec(in, "knots");
        b.finish_piecewise();
    } else {
        throw DataError("unknown basis form '" + form + "'");
    }
    if (!in) throw DataError("malformed basis record");
    return b;
}

Projector::Projector(FittedBasis basis, std::span<const double> features, double ridge, std::size_t workers)
    : basis_(std::move(basis)), workers_(workers) {
    const std::size_t m = basis_.dim();
    samples_ = features.size() / m;
    const std::size_t K = basis_.row_nonzeros();
    const std::size_t s = basis_.size();
    idx_.resize(samples_ * K);
    val_.resize(samples_ * K);

    const std::size_t blocks = block_count(samples_);
    std::vector<Eigen::MatrixXd> partial(blocks);
    for_each_block(samples_, workers_, [&](std::size_t b, std::size_t begin, std::size_t end) {
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s));
        for (std::size_t p = begin; p < end; ++p) {
            std::span<std::uint32_t> ri(idx_.data() + p * K, K);
            std::span<double> rv(val_.data() + p * K, K);
            basis_.evaluate(features.subspan(p * m, m), ri, rv);
            for (std::size_t a = 0; a < K; ++a)
                for (std::size_t c = 0; c < K; ++c) g(ri[a], ri[c]) += rv[a] * rv[c];
        }
        partial[b] = std::move(g);
    });
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s));
    for (const auto& g : partial) gram += g;
    gram /= static_cast<double>(samples_);
    gram.diagonal().array() += ridge;
    ldlt_.compute(gram);
    const Eigen::VectorXd d = ldlt_.vectorD();
    const double dmax = d.cwiseAbs().maxCoeff();
    const double dmin = d.minCoeff();
    if (ldlt_.info() != Eigen::Success || !(dmin > 1e-14 * dmax))
        throw SolverError("rank-deficient regression design (basis " + basis_.id() + ", " +
                          std::to_string(samples_) + " samples)");
    condition_ = dmax / dmin;
}

Eigen::VectorXd Projector::fit(std::span<const double> targets) const {
    if (targets.size() != samples_) throw DimensionError("target count does not match the design");
    const std::size_t K = basis_.row_nonzeros();
    const auto s = static_cast<Eigen::Index>(basis_.size());
    const std::size_t blocks = block_count(samples_);
    std::vector<Eigen::VectorXd> partial(blocks);
    for_each_block(samples_, workers_, [&](std::size_t b, std::size_t begin, std::size_t end) {
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(s);
        for (std::size_t p = begin; p < end; ++p)
            for (std::size_t a = 0; a < K; ++a) acc[idx_[p * K + a]] += val_[p * K + a] * targets[p];
        partial[b] = std::move(acc);
    });
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(s);
    for (const auto& v : partial) rhs += v;
    rhs /= static_cast<double>(samples_);
    return ldlt_.solve(rhs);
}

void Projector::predict(const Eigen::VectorXd& coef, std::span<double> out) const {
    const std::size_t K = basis_.row_nonzeros();
    for_each_block(samples_, workers_, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            double v = 0.0;
            for (std::size_t a = 0; a < K; ++a) v += coef[idx_[p * K + a]] * val_[p * K + a];
            out[p] = v;
        }
    });
}

RegressionResult regress_conditional_expectation(std::span<const double> features, std::size_t dim,
                                                 std::span<const double> targets, const BasisSpec& basis,
                                                 std::size_t workers) {
    const std::size_t P = features.size() / dim;
    FittedBasis fb = FittedBasis::fit(features, dim, basis);
    if (P <= fb.size() && fb.form() != FittedBasis::Form::constant)
        throw std::invalid_argument("regression needs more samples than basis functions");
    Projector proj(std::move(fb), features, basis.ridge_lambda, workers);
    return {proj.basis(), proj.fit(targets)};
}

}  // namespace bsdelab
