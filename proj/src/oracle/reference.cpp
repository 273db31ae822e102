#include "bsdelab/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "bsdelab/errors.hpp"

namespace bsdelab {

namespace {

std::size_t bracket(const std::vector<double>& grid, double v) {
    if (v <= grid.front()) return 0;
    if (v >= grid.back()) return grid.size() - 2;
    auto it = std::upper_bound(grid.begin(), grid.end(), v);
    return static_cast<std::size_t>(it - grid.begin()) - 1;
}

}  // namespace

double ReferenceSolution::value(std::size_t c, double tq, double xq) const {
    auto in_x = [&](std::size_t s) {
        if (x.size() == 1) return at(c, s, 0);
        const std::size_t j = bracket(x, xq);
        const double w = std::clamp((xq - x[j]) / (x[j + 1] - x[j]), 0.0, 1.0);
        return (1.0 - w) * at(c, s, j) + w * at(c, s, j + 1);
    };
    if (t.size() == 1) return in_x(0);
    const std::size_t s = bracket(t, tq);
    const double w = std::clamp((tq - t[s]) / (t[s + 1] - t[s]), 0.0, 1.0);
    if (w == 0.0) return in_x(s);
    if (w == 1.0) return in_x(s + 1);
    return (1.0 - w) * in_x(s) + w * in_x(s + 1);
}

ReferenceSolution solve_semilinear_pde(const ProblemSpec& problem, const PdeGridSpec& spec,
                                       const std::vector<double>& times) {
    if (problem.dim() != 1) throw DimensionError("the PDE reference supports one space dimension only");
    if (spec.space_cells < 4 || spec.time_steps < 1 || !(spec.half_width > 0.0))
        throw std::invalid_argument("invalid PDE grid");
    const std::size_t n = problem.components();
    const std::size_t J = spec.space_cells + 1;
    const double L = spec.half_width;
    const double dx = 2.0 * L / static_cast<double>(spec.space_cells);
    const double T = problem.horizon_T;
    const std::size_t S = spec.time_steps;
    const double dt = T / static_cast<double>(S);

    ReferenceSolution ref;
    ref.components = n;
    ref.x.resize(J);
    for (std::size_t j = 0; j < J; ++j) ref.x[j] = -L + dx * static_cast<double>(j);
    ref.t = times;
    std::sort(ref.t.begin(), ref.t.end());
    for (double tq : ref.t)
        if (tq < -1e-12 || tq > T + 1e-12) throw std::invalid_argument("reference time outside [0, T]");
    ref.values.assign(n * ref.t.size() * J, 0.0);

    std::vector<double> u(n * J), rhs(J), cp(J), dp(J), a2(J);
    for (std::size_t j = 0; j < J; ++j)
        for (std::size_t c = 0; c < n; ++c) u[c * J + j] = problem.terminal.evaluate(std::span(&ref.x[j], 1), c);

    auto store = [&](double tnow) {
        for (std::size_t s = 0; s < ref.t.size(); ++s)
            if (std::abs(ref.t[s] - tnow) <= 0.5 * dt)
                for (std::size_t c = 0; c < n; ++c)
                    std::copy(u.begin() + static_cast<long>(c * J), u.begin() + static_cast<long>((c + 1) * J),
                              ref.values.begin() + static_cast<long>((c * ref.t.size() + s) * J));
    };
    store(T);

    const ArgLayout lay = problem.generator.layout();
    std::vector<double> w(lay.size()), sig(1), h(n);
    std::vector<double> next(n * J);
    for (std::size_t step = S; step-- > 0;) {
        const double t_known = dt * static_cast<double>(step + 1);
        const double t_new = dt * static_cast<double>(step);
        // Explicit nonlinearity at the known level.
        for (std::size_t j = 0; j < J; ++j) {
            const double xj = ref.x[j];
            problem.diffusion.sigma(t_known, std::span(&xj, 1), sig);
            for (std::size_t c = 0; c < n; ++c) {
                const double* uc = u.data() + c * J;
                const double ux = (j == 0 || j + 1 == J) ? 0.0 : (uc[j + 1] - uc[j - 1]) / (2.0 * dx);
                w[lay.y(c)] = uc[j];
                w[lay.z(c, 0)] = sig[0] * ux;
            }
            for (std::size_t c = 0; c < n; ++c) {
                h[c] = problem.generator.evaluate(t_known, std::span(&xj, 1), w, c);
                if (!std::isfinite(h[c])) throw SolverError("non-finite generator value in PDE reference");
                next[c * J + j] = u[c * J + j] + dt * h[c];
            }
        }
        // Implicit diffusion with reflecting ends: (I - dt a D2) u_new = next.
        for (std::size_t j = 0; j < J; ++j) {
            const double xj = ref.x[j];
            problem.diffusion.sigma(t_new, std::span(&xj, 1), sig);
            a2[j] = 0.5 * sig[0] * sig[0] * dt / (dx * dx);
        }
        for (std::size_t c = 0; c < n; ++c) {
            const double* r = next.data() + c * J;
            // Thomas algorithm; ghost nodes mirror the neighbours.
            for (std::size_t j = 0; j < J; ++j) {
                const double diag = 1.0 + 2.0 * a2[j];
                double lower = -a2[j], upper = -a2[j];
                if (j == 0) {
                    upper = -2.0 * a2[j];
                    lower = 0.0;
                }
                if (j + 1 == J) {
                    lower = -2.0 * a2[j];
                    upper = 0.0;
                }
                const double denom = j == 0 ? diag : diag - lower * cp[j - 1];
                cp[j] = upper / denom;
                dp[j] = (r[j] - (j == 0 ? 0.0 : lower * dp[j - 1])) / denom;
            }
            double* uc = u.data() + c * J;
            uc[J - 1] = dp[J - 1];
            for (std::size_t j = J - 1; j-- > 0;) uc[j] = dp[j] - cp[j] * uc[j + 1];
        }
        store(t_new);
    }
    return ref;
}

void write_reference(const ReferenceSolution& ref, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw DataError("cannot write " + file.string());
    out << "t,x,component,y\n";
    char buf[128];
    for (std::size_t s = 0; s < ref.t.size(); ++s)
        for (std::size_t j = 0; j < ref.x.size(); ++j)
            for (std::size_t c = 0; c < ref.components; ++c) {
                std::snprintf(buf, sizeof buf, "%.17g,%.17g,%zu,%.17g\n", ref.t[s], ref.x[j], c, ref.at(c, s, j));
                out << buf;
            }
}

ReferenceSolution read_reference(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot read " + file.string());
    std::string line;
    std::getline(in, line);
    if (line != "t,x,component,y") throw DataError(file.string() + ": unexpected header");
    struct Row {
        double t, x;
        std::size_t c;
        double y;
    };
    std::vector<Row> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Row r{};
        if (std::sscanf(line.c_str(), "%lf,%lf,%zu,%lf", &r.t, &r.x, &r.c, &r.y) != 4)
            throw DataError(file.string() + ": malformed row '" + line + "'");
        rows.push_back(r);
    }
    ReferenceSolution ref;
    for (const auto& r : rows) {
        if (ref.t.empty() || r.t != ref.t.back()) {
            if (!ref.t.empty() && r.t < ref.t.back()) throw DataError(file.string() + ": times not sorted");
            ref.t.push_back(r.t);
        }
        ref.components = std::max(ref.components, r.c + 1);
    }
    for (const auto& r : rows) {
        if (r.t != ref.t.front()) break;
        if (r.c == 0) ref.x.push_back(r.x);
    }
    const std::size_t expect = ref.t.size() * ref.x.size() * ref.components;
    if (rows.size() != expect) throw DataError(file.string() + ": lattice is not rectangular");
    ref.values.assign(expect, 0.0);
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const std::size_t c = k % ref.components;
        const std::size_t j = (k / ref.components) % ref.x.size();
        const std::size_t s = k / (ref.components * ref.x.size());
        ref.values[(c * ref.t.size() + s) * ref.x.size() + j] = rows[k].y;
    }
    return ref;
}

double closed_form_y(const std::string& scenario, double T, double t, double x, std::size_t) {
    if (scenario == "zero") return 0.0;
    if (scenario == "linear-1d") return std::exp(-(T - t)) * x;
    if (scenario == "coupled-ode") return std::exp(T - t);
    if (scenario == "quadratic-terminal") return x * x + (T - t);
    throw std::invalid_argument("no closed form for scenario '" + scenario + "'");
}

double closed_form_z(const std::string& scenario, double T, double t, double x, std::size_t) {
    if (scenario == "zero" || scenario == "coupled-ode") return 0.0;
    if (scenario == "linear-1d") return std::exp(-(T - t));
    if (scenario == "quadratic-terminal") return 2.0 * x;
    throw std::invalid_argument("no closed form for scenario '" + scenario + "'");
}

ReferenceSolution tabulate_closed_form(const std::string& scenario, double T, const std::vector<double>& times,
                                       const std::vector<double>& xs, std::size_t components) {
    ReferenceSolution ref;
    ref.t = times;
    ref.x = xs;
    ref.components = components;
    ref.values.resize(components * times.size() * xs.size());
    for (std::size_t c = 0; c < components; ++c)
        for (std::size_t s = 0; s < times.size(); ++s)
            for (std::size_t j = 0; j < xs.size(); ++j)
                ref.values[(c * times.size() + s) * xs.size() + j] = closed_form_y(scenario, T, times[s], xs[j], c);
    return ref;
}

}  // namespace bsdelab
