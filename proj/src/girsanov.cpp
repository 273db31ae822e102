#include "bsdelab/girsanov.hpp"

#include <cmath>
#include <stdexcept>

#include "bsdelab/csv.hpp"
#include "bsdelab/driver.hpp"
#include "bsdelab/errors.hpp"
#include "bsdelab/mollifier.hpp"
#include "bsdelab/parallel.hpp"

namespace bsdelab {

double ExponentialMartingaleSample::mean() const { return pairwise_mean(terminal); }

ExponentialMartingaleSample stochastic_exponential(const PathEnsemble& ens, const IntegrandFn& h, double bound,
                                                   std::string description) {
    if (!(bound >= 0.0)) throw std::invalid_argument("integrand bound must be nonnegative");
    const std::size_t m = ens.dim;
    ExponentialMartingaleSample out;
    out.integrand = std::move(description);
    out.grid = ens.grid;
    out.terminal.resize(ens.paths);
    for_each_block(ens.paths, 1, [&](std::size_t, std::size_t begin, std::size_t end) {
        std::vector<double> hv(m);
        for (std::size_t p = begin; p < end; ++p) {
            double logv = 0.0;
            for (std::size_t k = 0; k < ens.grid.steps(); ++k) {
                h(k, p, hv);
                const double norm = euclidean_norm(hv);
                if (!(norm <= bound))
                    throw SimulationError("integrand exceeds its bound " + std::to_string(bound), k, p);
                const auto db = ens.increment(k, p);
                for (std::size_t j = 0; j < m; ++j) logv += hv[j] * db[j];
                logv -= 0.5 * norm * norm * ens.grid.dt(k);
            }
            out.terminal[p] = std::exp(logv);
        }
    });
    return out;
}

MomentEstimate p0_moment(const ExponentialMartingaleSample& sample, double p0) {
    if (!(p0 > 1.0 && p0 < 2.0)) throw std::invalid_argument("p0 must lie in (1, 2)");
    const std::size_t P = sample.terminal.size();
    if (P < 2) throw std::invalid_argument("moment estimate needs at least two paths");
    std::vector<double> v(P);
    for (std::size_t p = 0; p < P; ++p) v[p] = std::pow(sample.terminal[p], p0);
    MomentEstimate est;
    const double total = pairwise_sum(v);
    est.value = total / static_cast<double>(P);
    // Leave-one-out means (total - v_p) / (P - 1).
    std::vector<double> dev(P);
    const double n1 = static_cast<double>(P - 1);
    for (std::size_t p = 0; p < P; ++p) {
        const double loo = (total - v[p]) / n1;
        dev[p] = (loo - est.value) * (loo - est.value);
    }
    est.std_error = std::sqrt(n1 / static_cast<double>(P) * pairwise_sum(dev));
    return est;
}

ProblemSpec dominating_problem(const ProblemSpec& problem, int n, std::size_t component, double sign) {
    if (n < 1) throw std::invalid_argument("truncation index must be positive");
    if (component >= problem.components()) throw DimensionError("component index out of range");
    const std::size_t m = problem.dim();
    const double c2 = problem.generator.growth_C2;
    const double ch = problem.generator.growth_Ch;
    const double gamma = problem.generator.growth_gamma;
    ProblemSpec dom = problem;
    dom.name = problem.name + "-dominating";
    GeneratorSpec& g = dom.generator;
    g.id = "dominating";
    g.n_components = 1;
    g.dim_m = m;
    const ArgLayout lay{1, m};
    std::vector<std::size_t> all(lay.size());
    for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
    g.terms = {{GeneratorTerm{[=](double, std::span<const double> x, std::span<const double> w) {
                                  double xs[16];
                                  const std::span<double> xt(xs, x.size());
                                  truncate_into(x, n, xt);
                                  const double xn = euclidean_norm(xt);
                                  return c2 * (1.0 + xn) * euclidean_norm(w.subspan(lay.z(0, 0), m)) +
                                         ch * (1.0 + std::pow(xn, gamma) + std::abs(w[0]));
                              },
                              all}}};
    if (m > 16) throw DimensionError("dominating problem supports at most 16 dimensions");
    const TerminalSpec base = problem.terminal;
    dom.terminal.fn = [base, component, sign](std::span<const double> x, std::size_t) {
        return sign * base.evaluate(x, component);
    };
    return dom;
}

Solution solve_dominating_bsde(const ProblemSpec& problem, int n, const PathEnsemble& ensemble,
                               const SolverConfig& config, std::size_t component, double sign) {
    const ProblemSpec dom = dominating_problem(problem, n, component, sign);
    RawDriver driver(dom.generator);
    return solve_backward(dom, driver, ensemble, config);
}

IntegrandFn dominating_integrand(const ProblemSpec& problem, int n, const ValueFields& dominating,
                                 const PathEnsemble& ensemble) {
    const double c2 = problem.generator.growth_C2;
    const std::size_t m = ensemble.dim;
    return [c2, n, m, &dominating, &ensemble](std::size_t k, std::size_t p, std::span<double> out) {
        const auto x = ensemble.state(k, p);
        double xs[16];
        const std::span<double> xt(xs, m);
        truncate_into(x, n, xt);
        const double scale = c2 * (1.0 + euclidean_norm(xt));
        const NodeField& nf = dominating.nodes[k];
        for (std::size_t j = 0; j < m; ++j) {
            const double z = nf.basis.dot(nf.z[j], x);
            out[j] = z > 0.0 ? scale : z < 0.0 ? -scale : 0.0;
        }
    };
}

ComparisonResult comparison_check(const ValueFields& fields_n, std::size_t component, const ValueFields& upper,
                                  const ValueFields& lower, const std::vector<ProbePoint>& probes) {
    if (!(fields_n.grid == upper.grid) || !(fields_n.grid == lower.grid))
        throw std::invalid_argument("comparison needs fields on a shared grid");
    ComparisonResult res;
    res.max_violation = -INFINITY;
    for (const auto& pt : probes) {
        ComparisonRow row;
        row.t = pt.t;
        row.x = pt.x;
        row.value = evaluate_y(fields_n, pt.node, component, pt.x);
        row.upper = evaluate_y(upper, pt.node, 0, pt.x);
        row.lower = -evaluate_y(lower, pt.node, 0, pt.x);
        row.violation = std::max(row.value - row.upper, row.lower - row.value);
        res.max_violation = std::max(res.max_violation, row.violation);
        res.rows.push_back(std::move(row));
    }
    if (probes.empty()) res.max_violation = 0.0;
    return res;
}

void write_moment_csv(const std::filesystem::path& file, const std::vector<int>& n_values,
                      const std::vector<std::vector<std::pair<double, MomentEstimate>>>& rows) {
    CsvWriter csv(file, {"n", "p0", "moment", "stderr"});
    for (std::size_t s = 0; s < n_values.size(); ++s)
        for (const auto& [p0, est] : rows[s]) csv.row({n_values[s], p0, est.value, est.std_error});
}

void write_comparison_csv(const std::filesystem::path& file, const ComparisonResult& result) {
    CsvWriter csv(file, {"t", "x", "y", "ybar_upper", "ybar_lower", "violation"});
    for (const auto& r : result.rows) csv.row({r.t, r.x[0], r.value, r.upper, r.lower, r.violation});
}

}  // namespace bsdelab
