#include "bsdelab/bsde_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "bsdelab/errors.hpp"
#include "bsdelab/parallel.hpp"

namespace bsdelab {

FieldValue evaluate_fields(const ValueFields& fields, std::size_t k, std::span<const double> x) {
    if (k >= fields.nodes.size()) throw std::out_of_range("field node index out of range");
    const std::size_t n = fields.components;
    const std::size_t m = fields.dim;
    FieldValue out;
    out.y.resize(n);
    out.z = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    const NodeField& node = fields.nodes[k];
    for (std::size_t i = 0; i < n; ++i) out.y[i] = node.basis.dot(node.y[i], x);
    const NodeField* zn = &node;
    if (zn->z.empty() && k > 0) zn = &fields.nodes[k - 1];
    if (!zn->z.empty())
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j)
                out.z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    zn->basis.dot(zn->z[i * m + j], x);
    return out;
}

double evaluate_y(const ValueFields& fields, std::size_t k, std::size_t i, std::span<const double> x) {
    if (k >= fields.nodes.size()) throw std::out_of_range("field node index out of range");
    return fields.nodes[k].basis.dot(fields.nodes[k].y[i], x);
}

namespace {

bool is_diverging(const std::vector<double>& history) {
    // Three consecutive increases after the first iteration.
    const std::size_t h = history.size();
    if (h < 5) return false;
    return history[h - 1] > history[h - 2] && history[h - 2] > history[h - 3] && history[h - 3] > history[h - 4];
}

}  // namespace

Solution solve_backward(const ProblemSpec& problem, const Driver& driver, const PathEnsemble& ensemble,
                        const SolverConfig& config) {
    const std::size_t n = problem.components();
    const std::size_t m = problem.dim();
    const ArgLayout layout = driver.layout();
    if (layout.n != n || layout.m != m) throw DimensionError("driver layout does not match the problem");
    if (ensemble.dim != m) throw DimensionError("ensemble dimension does not match the problem");
    if (std::abs(ensemble.grid.horizon() - problem.horizon_T) > 1e-9)
        throw std::invalid_argument("ensemble grid does not end at the problem horizon");
    if (!(config.picard_tol > 0.0) || config.picard_max < 1)
        throw std::invalid_argument("Picard tolerance and iteration cap must be positive");

    const TimeGrid& grid = ensemble.grid;
    const std::size_t N = grid.steps();
    const std::size_t P = ensemble.paths;
    const std::size_t workers = config.workers;
    if (P < 2) throw std::invalid_argument("the backward scheme needs at least two paths");

    Solution sol;
    ValueFields& fields = sol.fields;
    fields.components = n;
    fields.dim = m;
    fields.basis = config.basis;
    fields.grid = grid;
    fields.nodes.resize(N + 1);
    SolutionStats& stats = sol.stats;
    stats.picard_iterations.assign(N, 0);
    stats.picard_history.assign(N, {});
    stats.condition.assign(N + 1, 1.0);

    // Pathwise values, component-major: y[i * P + p].
    std::vector<double> y_next(n * P), y_cur(n * P), cond_mean(n * P), z(n * m * P), target(P);
    std::vector<double> y_sup(n * P, 0.0), z_energy(n * P, 0.0);

    auto make_projector = [&](std::size_t k) {
        const auto feats = ensemble.node_states(k);
        return Projector(FittedBasis::fit(feats, m, config.basis), feats, config.basis.ridge_lambda, workers);
    };
    auto check_finite = [&](const std::vector<double>& v, std::size_t k, const char* what) {
        for (double a : v)
            if (!std::isfinite(a))
                throw SolverError(std::string("non-finite ") + what + " at time node " + std::to_string(k));
    };

    for_each_block(P, workers, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            const auto x = ensemble.state(N, p);
            for (std::size_t i = 0; i < n; ++i) {
                const double g = problem.terminal.evaluate(x, i);
                y_next[i * P + p] = g;
                y_sup[i * P + p] = std::abs(g);
            }
        }
    });
    check_finite(y_next, N, "terminal value");
    {
        Projector proj = make_projector(N);
        stats.condition[N] = proj.condition();
        NodeField& nf = fields.nodes[N];
        for (std::size_t i = 0; i < n; ++i) nf.y.push_back(proj.fit(std::span(y_next).subspan(i * P, P)));
        nf.basis = proj.basis();
    }

    for (std::size_t kk = N; kk-- > 0;) {
        const std::size_t k = kk;
        const double t = grid.node(k);
        const double dt = grid.dt(k);
        Projector proj = make_projector(k);
        stats.condition[k] = proj.condition();
        NodeField& nf = fields.nodes[k];

        for (std::size_t i = 0; i < n; ++i) {
            const auto coef = proj.fit(std::span(y_next).subspan(i * P, P));
            proj.predict(coef, std::span(cond_mean).subspan(i * P, P));
        }
        // Centered martingale increment: same conditional target as
        // E[Y_{k+1} dB | X_k] / dt, with smaller variance.
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                for_each_block(P, workers, [&](std::size_t, std::size_t begin, std::size_t end) {
                    for (std::size_t p = begin; p < end; ++p)
                        target[p] = (y_next[i * P + p] - cond_mean[i * P + p]) * ensemble.increment(k, p)[j] / dt;
                });
                nf.z.push_back(proj.fit(target));
                proj.predict(nf.z.back(), std::span(z).subspan((i * m + j) * P, P));
            }
        }

        // Second pass for the conditional mean with Z dB as control variate:
        // E[Y_{k+1} - Z_k dB_k | X_k] = E[Y_{k+1} | X_k] and the residual
        // variance drops from O(dt) to the regression error of Z times dt.
        for (std::size_t i = 0; i < n; ++i) {
            for_each_block(P, workers, [&](std::size_t, std::size_t begin, std::size_t end) {
                for (std::size_t p = begin; p < end; ++p) {
                    double v = y_next[i * P + p];
                    const auto db = ensemble.increment(k, p);
                    for (std::size_t j = 0; j < m; ++j) v -= z[(i * m + j) * P + p] * db[j];
                    target[p] = v;
                }
            });
            proj.predict(proj.fit(target), std::span(cond_mean).subspan(i * P, P));
        }

        std::copy(y_next.begin(), y_next.end(), y_cur.begin());
        std::vector<double> history;
        const std::size_t blocks = block_count(P);
        std::vector<double> block_residual(blocks);
        bool converged = false;
        for (std::size_t it = 0; it < config.picard_max; ++it) {
            for_each_block(P, workers, [&](std::size_t b, std::size_t begin, std::size_t end) {
                std::vector<double> w(layout.size()), h(n);
                double res = 0.0;
                for (std::size_t p = begin; p < end; ++p) {
                    for (std::size_t i = 0; i < n; ++i) {
                        w[layout.y(i)] = y_cur[i * P + p];
                        for (std::size_t j = 0; j < m; ++j) w[layout.z(i, j)] = z[(i * m + j) * P + p];
                    }
                    driver.evaluate(t, ensemble.state(k, p), w, h);
                    for (std::size_t i = 0; i < n; ++i) {
                        const double v = cond_mean[i * P + p] + dt * h[i];
                        const double d = std::abs(v - y_cur[i * P + p]);
                        res = std::isfinite(d) ? std::max(res, d) : INFINITY;
                        y_cur[i * P + p] = v;
                    }
                }
                block_residual[b] = res;
            });
            const double res = *std::max_element(block_residual.begin(), block_residual.end());
            history.push_back(res);
            stats.picard_iterations[k] = it + 1;
            if (!std::isfinite(res)) throw StepFailure(k, history);
            if (res <= config.picard_tol) {
                converged = true;
                break;
            }
            if (is_diverging(history)) throw StepFailure(k, history);
        }
        if (!converged) throw StepFailure(k, history);
        stats.max_picard_residual = std::max(stats.max_picard_residual, history.back());
        stats.picard_history[k] = std::move(history);

        for (std::size_t i = 0; i < n; ++i) nf.y.push_back(proj.fit(std::span(y_cur).subspan(i * P, P)));
        nf.basis = proj.basis();

        for_each_block(P, workers, [&](std::size_t, std::size_t begin, std::size_t end) {
            for (std::size_t p = begin; p < end; ++p)
                for (std::size_t i = 0; i < n; ++i) {
                    y_sup[i * P + p] = std::max(y_sup[i * P + p], std::abs(y_cur[i * P + p]));
                    double zz = 0.0;
                    for (std::size_t j = 0; j < m; ++j) zz += z[(i * m + j) * P + p] * z[(i * m + j) * P + p];
                    z_energy[i * P + p] += zz * dt;
                }
        });
        std::swap(y_next, y_cur);
    }

    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> pw(P);
        for (std::size_t p = 0; p < P; ++p) pw[p] = std::pow(y_sup[i * P + p], config.alpha);
        stats.y_moment.push_back(pairwise_mean(pw));
        stats.z_energy.push_back(pairwise_mean(std::span(z_energy).subspan(i * P, P)));
    }
    return sol;
}

namespace {

void write_coefs(std::ostream& out, const Eigen::VectorXd& c) {
    char buf[32];
    out << ' ' << c.size();
    for (Eigen::Index r = 0; r < c.size(); ++r) {
        std::snprintf(buf, sizeof buf, "%.17g", c[r]);
        out << ' ' << buf;
    }
    out << '\n';
}

Eigen::VectorXd read_coefs(std::istream& in) {
    Eigen::Index s = 0;
    if (!(in >> s) || s < 0) throw DataError("bad coefficient count in field file");
    Eigen::VectorXd c(s);
    for (Eigen::Index r = 0; r < s; ++r)
        if (!(in >> c[r])) throw DataError("truncated coefficient list in field file");
    return c;
}

void expect(std::istream& in, const std::string& word) {
    std::string got;
    if (!(in >> got) || got != word) throw DataError("field file: expected '" + word + "', got '" + got + "'");
}

}  // namespace

void write_fields(const ValueFields& fields, std::ostream& out) {
    char buf[32];
    out << "bsdelab-fields 1\n";
    out << "components " << fields.components << " dim " << fields.dim << '\n';
    std::snprintf(buf, sizeof buf, "%.17g", fields.basis.ridge_lambda);
    out << "basis-spec " << to_string(fields.basis.kind) << ' ' << fields.basis.degree_or_bins << ' ' << buf << '\n';
    out << "grid " << fields.grid.nodes().size();
    for (double t : fields.grid.nodes()) {
        std::snprintf(buf, sizeof buf, "%.17g", t);
        out << ' ' << buf;
    }
    out << '\n';
    for (std::size_t k = 0; k < fields.nodes.size(); ++k) {
        const NodeField& nf = fields.nodes[k];
        out << "node " << k << '\n';
        nf.basis.write(out);
        for (std::size_t i = 0; i < nf.y.size(); ++i) {
            out << "y " << i;
            write_coefs(out, nf.y[i]);
        }
        for (std::size_t c = 0; c < nf.z.size(); ++c) {
            out << "z " << c / fields.dim << ' ' << c % fields.dim;
            write_coefs(out, nf.z[c]);
        }
        out << "end\n";
    }
}

ValueFields read_fields(std::istream& in) {
    ValueFields f;
    expect(in, "bsdelab-fields");
    expect(in, "1");
    expect(in, "components");
    in >> f.components;
    expect(in, "dim");
    in >> f.dim;
    std::string kind;
    expect(in, "basis-spec");
    in >> kind >> f.basis.degree_or_bins >> f.basis.ridge_lambda;
    f.basis.kind = basis_kind_from_string(kind);
    expect(in, "grid");
    std::size_t count = 0;
    in >> count;
    std::vector<double> nodes(count);
    for (auto& t : nodes) in >> t;
    if (!in) throw DataError("field file: malformed header");
    f.grid = TimeGrid(std::move(nodes));
    f.nodes.resize(count);
    for (std::size_t k = 0; k < count; ++k) {
        expect(in, "node");
        std::size_t idx = 0;
        in >> idx;
        if (idx != k) throw DataError("field file: nodes out of order");
        NodeField& nf = f.nodes[k];
        nf.basis = FittedBasis::read(in);
        for (std::string tag; in >> tag && tag != "end";) {
            std::size_t i = 0, j = 0;
            if (tag == "y") {
                in >> i;
                nf.y.push_back(read_coefs(in));
            } else if (tag == "z") {
                in >> i >> j;
                nf.z.push_back(read_coefs(in));
            } else {
                throw DataError("field file: unknown record '" + tag + "'");
            }
        }
        if (nf.y.size() != f.components || (!nf.z.empty() && nf.z.size() != f.components * f.dim))
            throw DataError("field file: wrong number of expansions at node " + std::to_string(k));
    }
    return f;
}

void save_fields(const ValueFields& fields, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw DataError("cannot write " + file.string());
    write_fields(fields, out);
}

ValueFields load_fields(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot read " + file.string());
    return read_fields(in);
}

}  // namespace bsdelab
