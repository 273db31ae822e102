#include "bsdelab/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "bsdelab/errors.hpp"
#include "bsdelab/rng.hpp"

namespace bsdelab {

StepFailure::StepFailure(std::size_t node, std::vector<double> history)
    : SolverError([&] {
          std::ostringstream os;
          os << "Picard iteration did not contract at time node " << node << " (residuals:";
          for (double r : history) os << ' ' << r;
          os << "); reduce the time step";
          return os.str();
      }()),
      node_(node), history_(std::move(history)) {}

Eigen::MatrixXd DiffusionSpec::matrix(double t, std::span<const double> x) const {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> s(dim_m, dim_m);
    sigma(t, x, std::span<double>(s.data(), dim_m * dim_m));
    return s;
}

double euclidean_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double GeneratorSpec::evaluate(double t, std::span<const double> x, std::span<const double> w,
                               std::size_t i) const {
    double h = 0.0;
    for (const auto& term : terms[i]) h += term.fn(t, x, w);
    return h;
}

double GeneratorSpec::growth_bound(std::span<const double> x, std::span<const double> w,
                                   std::size_t i) const {
    const ArgLayout lay = layout();
    const double xn = euclidean_norm(x);
    const double zn = euclidean_norm(w.subspan(lay.z(i, 0), lay.m));
    return growth_C2 * (1.0 + xn) * zn + growth_Ch * (1.0 + std::pow(xn, growth_gamma) + std::abs(w[lay.y(i)]));
}

std::vector<std::size_t> GeneratorSpec::all_arguments() const {
    std::vector<std::size_t> idx(layout().size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
}

void ProblemSpec::check_consistency() const {
    if (diffusion.dim_m == 0 || generator.n_components == 0)
        throw DimensionError("problem dimensions must be positive");
    if (generator.dim_m != diffusion.dim_m)
        throw DimensionError("generator dimension m=" + std::to_string(generator.dim_m) +
                             " differs from diffusion dimension m=" + std::to_string(diffusion.dim_m));
    if (generator.terms.size() != generator.n_components)
        throw DimensionError("generator declares " + std::to_string(generator.n_components) +
                             " components but provides " + std::to_string(generator.terms.size()));
    if (start_x.size() != diffusion.dim_m)
        throw DimensionError("start state has dimension " + std::to_string(start_x.size()));
    if (!(horizon_T > 0.0)) throw std::invalid_argument("horizon must be positive");
    if (start_t < 0.0 || start_t > horizon_T) throw std::invalid_argument("start time outside [0, T]");
    const auto width = generator.layout().size();
    for (const auto& comp : generator.terms)
        for (const auto& term : comp)
            for (auto idx : term.depends_on)
                if (idx >= width) throw DimensionError("generator term depends on argument out of range");
}

bool ValidationReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const AssumptionCheck& c) { return c.passed; });
}

const AssumptionCheck& ValidationReport::check(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return c;
    throw std::out_of_range("no assumption check named " + name);
}

namespace {

std::string describe(double t, std::span<const double> x, std::span<const double> w = {}) {
    std::ostringstream os;
    os.precision(6);
    os << "t=" << t << " x=(";
    for (std::size_t j = 0; j < x.size(); ++j) os << (j ? "," : "") << x[j];
    os << ")";
    if (!w.empty()) {
        os << " w=(";
        for (std::size_t j = 0; j < w.size(); ++j) os << (j ? "," : "") << w[j];
        os << ")";
    }
    return os.str();
}

void require_finite(double v, const char* what, double t, std::span<const double> x,
                    std::span<const double> w = {}) {
    if (!std::isfinite(v))
        throw ValidationError(std::string("non-finite evaluation of ") + what + " at " + describe(t, x, w));
}

struct Tracker {
    AssumptionCheck check;
    bool seen = false;

    explicit Tracker(std::string name) { check.name = std::move(name); }

    void observe(double margin, const std::string& where) {
        if (!seen || margin > check.worst_margin) {
            check.worst_margin = margin;
            check.worst_point = where;
            seen = true;
        }
    }
};

double frobenius(const Eigen::MatrixXd& a) { return a.norm(); }

double inverse_norm(const Eigen::MatrixXd& a) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible()) return std::numeric_limits<double>::infinity();
    return lu.inverse().norm();
}

}  // namespace

ValidationReport validate_problem(const ProblemSpec& spec, const ValidationOptions& options) {
    if (options.sample_count < 1) throw std::invalid_argument("sample_count must be at least 1");
    spec.check_consistency();

    const std::size_t m = spec.dim();
    const std::size_t n = spec.components();
    const ArgLayout lay = spec.generator.layout();
    const double R = options.box_radius;
    const double T = spec.horizon_T;

    Tracker lipschitz("sigma_lipschitz");
    Tracker bound("sigma_bound");
    Tracker elliptic("ellipticity");
    Tracker terminal("terminal_growth");
    Tracker growth("generator_growth");

    const std::vector<double> perturbations{1e-2, 1e-4, 1e-6};
    std::vector<double> continuity(perturbations.size(), 0.0);

    const Philox4x32 gen(derive_key(options.seed, StreamDomain::validation));
    std::vector<double> x(m), x2(m), w(lay.size()), wp(lay.size()), dir(lay.size());

    for (std::size_t s = 0; s < options.sample_count; ++s) {
        UniformStream u(gen, s);
        const double t = u.uniform(0.0, T);
        for (auto& v : x) v = u.uniform(-R, R);
        for (auto& v : x2) v = u.uniform(-R, R);
        for (auto& v : w) v = u.uniform(-R, R);
        for (auto& v : dir) v = u.uniform(-1.0, 1.0);
        const double dnorm = std::max(euclidean_norm(dir), 1e-300);

        const Eigen::MatrixXd s1 = spec.diffusion.matrix(t, x);
        const Eigen::MatrixXd s2 = spec.diffusion.matrix(t, x2);
        for (Eigen::Index k = 0; k < s1.size(); ++k) {
            require_finite(s1.data()[k], "sigma", t, x);
            require_finite(s2.data()[k], "sigma", t, x2);
        }

        double dx = 0.0;
        for (std::size_t j = 0; j < m; ++j) dx += (x[j] - x2[j]) * (x[j] - x2[j]);
        dx = std::sqrt(dx);
        lipschitz.observe(frobenius(s1 - s2) - spec.diffusion.lipschitz_C1 * dx, describe(t, x) + " vs " + describe(t, x2));

        bound.observe(frobenius(s1) + inverse_norm(s1) - spec.diffusion.bound_Csigma, describe(t, x));

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s1 * s1.transpose(), Eigen::EigenvaluesOnly);
        const double lo = std::max(eig.eigenvalues().minCoeff(), 0.0);
        const double hi = eig.eigenvalues().maxCoeff();
        const double eps = spec.diffusion.ellipticity_eps;
        elliptic.observe(std::max(eps - lo, hi - 1.0 / eps), describe(t, x));

        const double xn = euclidean_norm(x);
        for (std::size_t i = 0; i < n; ++i) {
            const double g = spec.terminal.evaluate(x, i);
            require_finite(g, "g", t, x);
            terminal.observe(std::abs(g) - spec.terminal.growth_Cg * (1.0 + std::pow(xn, spec.terminal.growth_gamma)),
                             describe(t, x) + " i=" + std::to_string(i));

            const double h = spec.generator.evaluate(t, x, w, i);
            require_finite(h, "H", t, x, w);
            growth.observe(std::abs(h) - spec.generator.growth_bound(x, w, i),
                           describe(t, x, w) + " i=" + std::to_string(i));

            for (std::size_t p = 0; p < perturbations.size(); ++p) {
                for (std::size_t j = 0; j < w.size(); ++j) wp[j] = w[j] + perturbations[p] * dir[j] / dnorm;
                const double hp = spec.generator.evaluate(t, x, wp, i);
                require_finite(hp, "H", t, x, wp);
                continuity[p] = std::max(continuity[p], std::abs(hp - h));
            }
        }
    }

    ValidationReport report;
    for (Tracker* tr : {&lipschitz, &bound, &elliptic, &terminal, &growth}) {
        tr->check.passed = tr->check.worst_margin <= options.tolerance;
        report.checks.push_back(tr->check);
    }
    for (std::size_t p = 0; p < perturbations.size(); ++p)
        report.continuity.push_back({perturbations[p], continuity[p]});
    return report;
}

}  // namespace bsdelab
