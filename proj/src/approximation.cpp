#include "bsdelab/approximation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bsdelab/csv.hpp"
#include "bsdelab/errors.hpp"
#include "bsdelab/parallel.hpp"

namespace bsdelab {

void ApproximationSchedule::check() const {
    if (n_values.empty()) throw std::invalid_argument("approximation schedule is empty");
    for (std::size_t k = 0; k < n_values.size(); ++k) {
        if (n_values[k] < 1) throw std::invalid_argument("schedule entries must be positive");
        if (k > 0 && n_values[k] <= n_values[k - 1])
            throw std::invalid_argument("schedule must be strictly increasing");
    }
}

std::vector<ProbePoint> default_probes(const PathEnsemble& ens, std::size_t times, std::size_t states) {
    if (times < 1 || states < 1) throw std::invalid_argument("probe grid needs at least one time and one state");
    const TimeGrid& grid = ens.grid;
    const double t0 = grid.node(0);
    const double T = grid.horizon();
    std::vector<std::size_t> nodes;
    for (std::size_t s = 0; s < times; ++s) {
        const double target = times == 1 ? t0 : t0 + (T - t0) * static_cast<double>(s) / static_cast<double>(times - 1);
        std::size_t best = 0;
        for (std::size_t k = 1; k <= grid.steps(); ++k)
            if (std::abs(grid.node(k) - target) < std::abs(grid.node(best) - target)) best = k;
        if (nodes.empty() || nodes.back() != best) nodes.push_back(best);
    }
    const std::size_t m = ens.dim;
    std::vector<ProbePoint> out;
    for (std::size_t k : nodes) {
        std::vector<double> mean(m, 0.0), sd(m, 0.0);
        for (std::size_t p = 0; p < ens.paths; ++p)
            for (std::size_t j = 0; j < m; ++j) mean[j] += ens.state(k, p)[j];
        for (auto& v : mean) v /= static_cast<double>(ens.paths);
        for (std::size_t p = 0; p < ens.paths; ++p)
            for (std::size_t j = 0; j < m; ++j) sd[j] += std::pow(ens.state(k, p)[j] - mean[j], 2);
        for (auto& v : sd) v = std::sqrt(v / static_cast<double>(ens.paths));
        std::vector<double> lo(m, INFINITY), hi(m, -INFINITY);
        for (std::size_t p = 0; p < ens.paths; ++p)
            for (std::size_t j = 0; j < m; ++j) {
                lo[j] = std::min(lo[j], ens.state(k, p)[j]);
                hi[j] = std::max(hi[j], ens.state(k, p)[j]);
            }
        for (std::size_t q = 0; q < states; ++q) {
            const double s = states == 1 ? 0.0 : -3.0 + 6.0 * static_cast<double>(q) / static_cast<double>(states - 1);
            ProbePoint pt{k, grid.node(k), std::vector<double>(m)};
            for (std::size_t j = 0; j < m; ++j) pt.x[j] = std::clamp(mean[j] + s * sd[j], lo[j], hi[j]);
            out.push_back(std::move(pt));
        }
    }
    return out;
}

std::vector<double> probe_values(const ValueFields& fields, const std::vector<ProbePoint>& probes) {
    const std::size_t n = fields.components;
    std::vector<double> out(probes.size() * n);
    for (std::size_t p = 0; p < probes.size(); ++p)
        for (std::size_t i = 0; i < n; ++i) out[p * n + i] = evaluate_y(fields, probes[p].node, i, probes[p].x);
    return out;
}

double probe_sup_gap(std::span<const double> a, std::span<const double> b, std::size_t components, std::size_t i) {
    if (a.size() != b.size()) throw DimensionError("probe value sets differ in size");
    double g = 0.0;
    for (std::size_t p = i; p < a.size(); p += components) g = std::max(g, std::abs(a[p] - b[p]));
    return g;
}

GrowthFit growth_bound_fit(const ValueFields& fields, std::size_t k, const std::vector<std::vector<double>>& xs,
                           std::size_t component) {
    std::vector<double> u, v;
    for (const auto& x : xs) {
        const double y = std::abs(evaluate_y(fields, k, component, x));
        if (y < 1e-12) continue;
        u.push_back(std::log1p(euclidean_norm(x)));
        v.push_back(std::log(y));
    }
    GrowthFit fit;
    if (u.empty()) {
        fit.degenerate = true;
        return fit;
    }
    const double n = static_cast<double>(u.size());
    double su = 0.0, sv = 0.0;
    for (std::size_t r = 0; r < u.size(); ++r) {
        su += u[r];
        sv += v[r];
    }
    const double mu = su / n, mv = sv / n;
    double suu = 0.0, suv = 0.0;
    for (std::size_t r = 0; r < u.size(); ++r) {
        suu += (u[r] - mu) * (u[r] - mu);
        suv += (u[r] - mu) * (v[r] - mv);
    }
    // A single distinct |x| carries no slope information.
    fit.lambda_hat = suu > 0.0 ? suv / suu : 0.0;
    fit.c_hat = std::exp(mv - fit.lambda_hat * mu);
    return fit;
}

namespace {

void check_shared_grid(const ValueFields& fields, const PathEnsemble& ens) {
    if (!(fields.grid == ens.grid)) throw std::invalid_argument("fields and ensemble use different time grids");
    if (fields.dim != ens.dim) throw DimensionError("fields and ensemble differ in dimension");
}

}  // namespace

UniformEstimates uniform_estimates_check(const ValueFields& fields, const PathEnsemble& ens, double alpha) {
    check_shared_grid(fields, ens);
    if (!(alpha > 1.0)) throw std::invalid_argument("alpha must exceed 1");
    const std::size_t n = fields.components;
    const std::size_t m = fields.dim;
    const std::size_t N = ens.grid.steps();
    const std::size_t P = ens.paths;
    std::vector<double> sup(n * P, 0.0), energy(n * P, 0.0);
    for_each_block(P, 1, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p)
            for (std::size_t k = 0; k <= N; ++k) {
                const auto x = ens.state(k, p);
                for (std::size_t i = 0; i < n; ++i) {
                    const double y = evaluate_y(fields, k, i, x);
                    sup[i * P + p] = std::max(sup[i * P + p], std::abs(y));
                }
                if (k == N) continue;
                const NodeField& nf = fields.nodes[k];
                for (std::size_t i = 0; i < n; ++i) {
                    double zz = 0.0;
                    for (std::size_t j = 0; j < m; ++j) zz += std::pow(nf.basis.dot(nf.z[i * m + j], x), 2);
                    energy[i * P + p] += zz * ens.grid.dt(k);
                }
            }
    });
    UniformEstimates out;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> pw(P);
        for (std::size_t p = 0; p < P; ++p) pw[p] = std::pow(sup[i * P + p], alpha);
        out.y_moment.push_back(pairwise_mean(pw));
        out.z_energy.push_back(pairwise_mean(std::span(energy).subspan(i * P, P)));
    }
    return out;
}

std::vector<double> z_field_gap(const ValueFields& a, const ValueFields& b, const PathEnsemble& ens) {
    check_shared_grid(a, ens);
    check_shared_grid(b, ens);
    const std::size_t n = a.components;
    const std::size_t m = a.dim;
    const std::size_t P = ens.paths;
    std::vector<double> acc(n * P, 0.0);
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t k = 0; k < ens.grid.steps(); ++k) {
            const auto x = ens.state(k, p);
            const NodeField& na = a.nodes[k];
            const NodeField& nb = b.nodes[k];
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) {
                    const double d = na.basis.dot(na.z[i * m + j], x) - nb.basis.dot(nb.z[i * m + j], x);
                    acc[i * P + p] += d * d * ens.grid.dt(k);
                }
        }
    std::vector<double> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(std::sqrt(pairwise_mean(std::span(acc).subspan(i * P, P))));
    return out;
}

IdentificationResidual driver_identification_residual(const ValueFields& fields_n, const ValueFields& limit,
                                                      const GeneratorSpec& raw, const MollifiedGenerator& mollified,
                                                      const PathEnsemble& ens, double truncation_k) {
    check_shared_grid(fields_n, ens);
    check_shared_grid(limit, ens);
    if (!(truncation_k > 0.0)) throw std::invalid_argument("truncation level must be positive");
    const std::size_t n = fields_n.components;
    const std::size_t m = fields_n.dim;
    const ArgLayout lay = raw.layout();
    const std::size_t P = ens.paths;
    std::vector<double> a1(P, 0.0), a2(P, 0.0), a3(P, 0.0);
    std::vector<double> w(lay.size()), wl(lay.size());
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t k = 0; k < ens.grid.steps(); ++k) {
            const double t = ens.grid.node(k);
            const double dt = ens.grid.dt(k);
            const auto x = ens.state(k, p);
            const FieldValue fn = evaluate_fields(fields_n, k, x);
            const FieldValue fl = evaluate_fields(limit, k, x);
            double size = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                w[lay.y(i)] = fn.y[i];
                wl[lay.y(i)] = fl.y[i];
                size += fn.y[i] * fn.y[i];
                for (std::size_t j = 0; j < m; ++j) {
                    const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
                    w[lay.z(i, j)] = fn.z(ii, jj);
                    wl[lay.z(i, j)] = fl.z(ii, jj);
                    size += fn.z(ii, jj) * fn.z(ii, jj);
                }
            }
            const bool inside = std::sqrt(size) < truncation_k;
            for (std::size_t i = 0; i < n; ++i) {
                const double h = raw.evaluate(t, x, w, i);
                const double d = std::abs(mollified.evaluate_component(t, x, w, i) - h) * dt;
                (inside ? a1 : a2)[p] += d;
                a3[p] += std::abs(h - raw.evaluate(t, x, wl, i)) * dt;
            }
        }
    return {pairwise_mean(a1), pairwise_mean(a2), pairwise_mean(a3)};
}

double PairGap::max_gap() const { return sup_gap.empty() ? 0.0 : *std::max_element(sup_gap.begin(), sup_gap.end()); }

SchemeResult run_scheme(const ProblemSpec& problem, const ApproximationSchedule& schedule,
                        const SchemeOptions& options, const std::vector<ProbePoint>& probes,
                        const PathEnsemble& ensemble) {
    schedule.check();
    const std::size_t n = problem.components();
    for (const auto& pt : probes) {
        if (pt.node > ensemble.grid.steps() || pt.x.size() != ensemble.dim)
            throw std::invalid_argument("probe does not fit the ensemble grid");
        const auto states = ensemble.node_states(pt.node);
        for (std::size_t j = 0; j < ensemble.dim; ++j) {
            double lo = INFINITY, hi = -INFINITY;
            for (std::size_t p = 0; p < ensemble.paths; ++p) {
                lo = std::min(lo, states[p * ensemble.dim + j]);
                hi = std::max(hi, states[p * ensemble.dim + j]);
            }
            if (pt.x[j] < lo - 1e-9 || pt.x[j] > hi + 1e-9)
                throw std::invalid_argument("probe at t=" + std::to_string(pt.t) + " lies outside the sampled hull");
        }
    }

    SchemeResult result;
    ConvergenceReport& rep = result.report;
    rep.components = n;
    rep.probes = probes;
    rep.tolerance = options.tolerance;

    std::vector<ValueFields> fields;
    std::vector<PathEnsemble> fresh;
    std::vector<MollifiedGenerator> gens;
    for (std::size_t s = 0; s < schedule.n_values.size(); ++s) {
        const int nn = schedule.n_values[s];
        gens.emplace_back(problem.generator, MollificationParams{nn, options.quad_order, "bump"});
        const PathEnsemble* ens = &ensemble;
        if (schedule.policy == PathPolicy::fresh) {
            SimulationOptions sim{ensemble.paths, ensemble.seed + s, options.solver.workers};
            fresh.push_back(simulate(problem.diffusion, ensemble.grid, ensemble.start_t, ensemble.start_x, sim));
            ens = &fresh.back();
        }
        Solution sol = solve_backward(problem, gens.back(), *ens, options.solver);
        ScheduleEntry e;
        e.n = nn;
        e.probe_values = probe_values(sol.fields, probes);
        e.stats = sol.stats;
        e.estimates = uniform_estimates_check(sol.fields, *ens, options.alpha);
        if (!options.growth_states.empty())
            for (std::size_t i = 0; i < n; ++i)
                e.growth.push_back(growth_bound_fit(sol.fields, options.growth_node, options.growth_states, i));
        if (!rep.entries.empty()) {
            PairGap g;
            g.n_from = rep.entries.back().n;
            g.n_to = nn;
            for (std::size_t i = 0; i < n; ++i)
                g.sup_gap.push_back(probe_sup_gap(rep.entries.back().probe_values, e.probe_values, n, i));
            // Z gaps are measured along the paths of the later solve.
            const ValueFields& prev = fields.back();
            if (prev.grid == sol.fields.grid) g.z_l2_gap = z_field_gap(prev, sol.fields, *ens);
            rep.pairs.push_back(std::move(g));
        }
        rep.entries.push_back(std::move(e));
        fields.push_back(std::move(sol.fields));
    }
    // Converged when the last gap is below tolerance; converged_at is the start
    // of the final run of sub-tolerance gaps.
    for (std::size_t s = rep.pairs.size(); s-- > 0;) {
        if (rep.pairs[s].max_gap() >= options.tolerance) break;
        rep.converged = true;
        rep.converged_at = rep.pairs[s].n_to;
    }

    // With fresh paths every field is still a function of (t, x), so all are
    // compared along the paths of the last solve.
    const PathEnsemble& ident_paths = schedule.policy == PathPolicy::fresh ? fresh.back() : ensemble;
    for (std::size_t s = 0; s < fields.size(); ++s)
        rep.entries[s].identification = driver_identification_residual(
            fields[s], fields.back(), problem.generator, gens[s], ident_paths, options.truncation_k);
    result.final_fields = fields.back();
    result.fields_by_n = std::move(fields);
    return result;
}

void write_convergence_report(const ConvergenceReport& rep, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const std::size_t n = rep.components;
    {
        CsvWriter csv(dir / "scheme_per_n.csv",
                      {"n", "component", "c_hat", "lambda_hat", "growth_degenerate", "y_moment", "z_energy", "i1", "i2",
                       "i3", "max_picard_residual"});
        for (const auto& e : rep.entries)
            for (std::size_t i = 0; i < n; ++i) {
                const GrowthFit g = i < e.growth.size() ? e.growth[i] : GrowthFit{0.0, 0.0, true};
                csv.row({e.n, i, g.c_hat, g.lambda_hat, g.degenerate ? 1 : 0, e.estimates.y_moment[i],
                         e.estimates.z_energy[i], e.identification.i1, e.identification.i2, e.identification.i3,
                         e.stats.max_picard_residual});
            }
    }
    {
        CsvWriter csv(dir / "scheme_pairs.csv", {"n_from", "n_to", "component", "sup_gap", "z_l2_gap"});
        for (const auto& g : rep.pairs)
            for (std::size_t i = 0; i < n; ++i)
                csv.row({g.n_from, g.n_to, i, g.sup_gap[i], i < g.z_l2_gap.size() ? g.z_l2_gap[i] : 0.0});
    }
    {
        CsvWriter csv(dir / "scheme_probes.csv", {"n", "t", "x", "component", "y"});
        for (const auto& e : rep.entries)
            for (std::size_t p = 0; p < rep.probes.size(); ++p)
                for (std::size_t i = 0; i < n; ++i)
                    csv.row({e.n, rep.probes[p].t, rep.probes[p].x[0], i, e.probe_values[p * n + i]});
    }
    {
        std::ofstream out(dir / "gap_vs_n.dat");
        out << "# n sup_gap\n";
        for (const auto& g : rep.pairs) out << g.n_to << ' ' << format_double(g.max_gap()) << '\n';
    }
}

}  // namespace bsdelab
