#include "bsdelab/catalogue.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bsdelab/errors.hpp"

namespace bsdelab {

namespace {

// Reads declared parameters and rejects anything else.
class Params {
public:
    Params(const std::string& where, const ParamMap& values) : where_(where), values_(values) {}

    double get(const std::string& key, double fallback) {
        seen_.push_back(key);
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    void finish() const {
        for (const auto& [key, value] : values_)
            if (std::find(seen_.begin(), seen_.end(), key) == seen_.end())
                throw ConfigError(where_ + "." + key, "unknown parameter");
    }

private:
    std::string where_;
    const ParamMap& values_;
    std::vector<std::string> seen_;
};

double norm(std::span<const double> x) { return euclidean_norm(x); }

}  // namespace

std::vector<std::string> diffusion_ids() { return {"identity", "constant", "diagonal", "bounded-scalar", "zero"}; }

DiffusionSpec make_diffusion(const std::string& id, std::size_t m, const ParamMap& values) {
    if (m == 0) throw ConfigError("diffusion.dim", "dimension must be positive");
    Params p("diffusion", values);
    DiffusionSpec d;
    d.id = id;
    d.dim_m = m;
    const double md = static_cast<double>(m);
    if (id == "identity" || id == "constant") {
        const double s = id == "constant" ? p.get("scale", 1.0) : 1.0;
        if (!(s > 0.0)) throw ConfigError("diffusion.scale", "must be positive");
        d.sigma = [m, s](double, std::span<const double>, std::span<double> out) {
            std::fill(out.begin(), out.end(), 0.0);
            for (std::size_t j = 0; j < m; ++j) out[j * m + j] = s;
        };
        d.bound_Csigma = std::sqrt(md) * (s + 1.0 / s);
        d.ellipticity_eps = std::min(s * s, 1.0 / (s * s));
    } else if (id == "diagonal") {
        std::vector<double> diag(m);
        double fro = 0.0, inv = 0.0, lo = INFINITY, hi = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            diag[j] = p.get("d" + std::to_string(j + 1), static_cast<double>(j + 1));
            if (!(diag[j] > 0.0)) throw ConfigError("diffusion.d" + std::to_string(j + 1), "must be positive");
            fro += diag[j] * diag[j];
            inv += 1.0 / (diag[j] * diag[j]);
            lo = std::min(lo, diag[j] * diag[j]);
            hi = std::max(hi, diag[j] * diag[j]);
        }
        d.sigma = [m, diag](double, std::span<const double>, std::span<double> out) {
            std::fill(out.begin(), out.end(), 0.0);
            for (std::size_t j = 0; j < m; ++j) out[j * m + j] = diag[j];
        };
        d.bound_Csigma = std::sqrt(fro) + std::sqrt(inv);
        d.ellipticity_eps = std::min(lo, 1.0 / hi);
    } else if (id == "bounded-scalar") {
        // sigma(x) = (1 / (1 + |x|^2 / 4) + 0.5) I: bounded in [0.5, 1.5], Lipschitz.
        d.sigma = [m](double, std::span<const double> x, std::span<double> out) {
            double r2 = 0.0;
            for (double v : x) r2 += v * v;
            const double s = 1.0 / (1.0 + r2 / 4.0) + 0.5;
            std::fill(out.begin(), out.end(), 0.0);
            for (std::size_t j = 0; j < m; ++j) out[j * m + j] = s;
        };
        // max |d/dr (1 + r^2/4)^-1| = 3 sqrt(3) / 16 at r = 2/sqrt(3).
        d.lipschitz_C1 = std::sqrt(md) * 3.0 * std::sqrt(3.0) / 16.0 + 1e-9;
        d.bound_Csigma = std::sqrt(md) * (1.5 + 2.0);
        d.ellipticity_eps = 0.25;
    } else if (id == "zero") {
        // Degenerate diagnostic diffusion; fails the ellipticity check by design.
        d.sigma = [](double, std::span<const double>, std::span<double> out) {
            std::fill(out.begin(), out.end(), 0.0);
        };
        d.bound_Csigma = 0.0;
        d.ellipticity_eps = 1.0;
    } else {
        throw ConfigError("diffusion.id", "unknown diffusion '" + id + "'");
    }
    d.lipschitz_C1 = p.get("C1", d.lipschitz_C1);
    d.bound_Csigma = p.get("Csigma", d.bound_Csigma);
    d.ellipticity_eps = p.get("eps", d.ellipticity_eps);
    p.finish();
    return d;
}

std::vector<std::string> generator_ids() { return {"zero", "linear-decay", "cross-linear", "abs-z", "linear-z", "demo"}; }

GeneratorSpec make_generator(const std::string& id, std::size_t n, std::size_t m, const ParamMap& values) {
    if (n == 0) throw ConfigError("generator.components", "must be positive");
    Params p("generator", values);
    GeneratorSpec g;
    g.id = id;
    g.n_components = n;
    g.dim_m = m;
    g.terms.assign(n, {});
    const ArgLayout lay{n, m};
    if (id == "zero") {
        g.growth_C2 = 0.0;
        g.growth_Ch = 0.0;
        g.growth_gamma = 1.0;
    } else if (id == "linear-decay") {
        // H_i = -a y^i
        const double a = p.get("a", 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t yi = lay.y(i);
            g.terms[i].push_back({[a, yi](double, std::span<const double>, std::span<const double> w) {
                                      return -a * w[yi];
                                  },
                                  {yi}});
        }
        g.growth_Ch = std::abs(a);
        g.growth_gamma = 1.0;
    } else if (id == "cross-linear") {
        // H_i = a y^{i+1}, indices cyclic: every component is driven by the next one.
        const double a = p.get("a", 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t yj = lay.y((i + 1) % n);
            g.terms[i].push_back({[a, yj](double, std::span<const double>, std::span<const double> w) {
                                      return a * w[yj];
                                  },
                                  {yj}});
        }
        // The growth bound controls H_i through |y^i| only; off-diagonal growth has to be
        // absorbed by C_h on the validation box.
        g.growth_Ch = std::abs(a) * 10.0;
        g.growth_gamma = 1.0;
    } else if (id == "abs-z" || id == "linear-z") {
        // H_i = c (1 + |x|) |z^i|  or  H_i = c z^i_1
        const double c = p.get("c", 1.0);
        const bool absolute = id == "abs-z";
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<std::size_t> dep;
            for (std::size_t j = 0; j < m; ++j) dep.push_back(lay.z(i, j));
            const std::size_t z0 = lay.z(i, 0);
            if (absolute)
                g.terms[i].push_back({[c, z0, m](double, std::span<const double> x, std::span<const double> w) {
                                          return c * (1.0 + norm(x)) * norm(w.subspan(z0, m));
                                      },
                                      dep});
            else
                g.terms[i].push_back(
                    {[c, z0](double, std::span<const double>, std::span<const double> w) { return c * w[z0]; },
                     {z0}});
        }
        g.growth_C2 = std::abs(c);
        g.growth_Ch = 0.0;
        g.growth_gamma = 1.0;
    } else if (id == "demo") {
        // H_i = c (1 + |x|) |z^i| + arctan(y^{i+1}), indices cyclic.
        const double c = p.get("c", 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<std::size_t> dep;
            for (std::size_t j = 0; j < m; ++j) dep.push_back(lay.z(i, j));
            const std::size_t z0 = lay.z(i, 0);
            const std::size_t yj = lay.y((i + 1) % n);
            g.terms[i].push_back({[c, z0, m](double, std::span<const double> x, std::span<const double> w) {
                                      return c * (1.0 + norm(x)) * norm(w.subspan(z0, m));
                                  },
                                  dep});
            g.terms[i].push_back(
                {[yj](double, std::span<const double>, std::span<const double> w) { return std::atan(w[yj]); },
                 {yj}});
        }
        g.growth_C2 = std::abs(c);
        g.growth_Ch = 2.0;  // >= pi / 2
        g.growth_gamma = 1.0;
    } else {
        throw ConfigError("generator.id", "unknown generator '" + id + "'");
    }
    g.growth_C2 = p.get("C2", g.growth_C2);
    g.growth_Ch = p.get("Ch", g.growth_Ch);
    g.growth_gamma = p.get("gamma", g.growth_gamma);
    p.finish();
    return g;
}

std::vector<std::string> terminal_ids() { return {"zero", "constant", "linear", "quadratic", "cosine"}; }

TerminalSpec make_terminal(const std::string& id, std::size_t n, std::size_t m, const ParamMap& values) {
    Params p("terminal", values);
    TerminalSpec g;
    g.id = id;
    const double md = static_cast<double>(m);
    if (id == "zero") {
        g.fn = [](std::span<const double>, std::size_t) { return 0.0; };
    } else if (id == "constant") {
        const double c = p.get("value", 1.0);
        g.fn = [c](std::span<const double>, std::size_t) { return c; };
        g.growth_Cg = std::abs(c);
        g.growth_gamma = 0.0;
    } else if (id == "linear") {
        // g^i(x) = x_1 + ... + x_m
        g.fn = [](std::span<const double> x, std::size_t) {
            double s = 0.0;
            for (double v : x) s += v;
            return s;
        };
        g.growth_Cg = std::sqrt(md);
        g.growth_gamma = 1.0;
    } else if (id == "quadratic") {
        g.fn = [](std::span<const double> x, std::size_t) {
            double s = 0.0;
            for (double v : x) s += v * v;
            return s;
        };
        g.growth_Cg = 1.0;
        g.growth_gamma = 2.0;
    } else if (id == "cosine") {
        g.fn = [](std::span<const double> x, std::size_t) { return std::cos(x[0]); };
        g.growth_Cg = 1.0;
        g.growth_gamma = 0.0;
    } else {
        throw ConfigError("terminal.id", "unknown terminal '" + id + "'");
    }
    (void)n;
    g.growth_Cg = p.get("Cg", g.growth_Cg);
    g.growth_gamma = p.get("gamma", g.growth_gamma);
    p.finish();
    return g;
}

namespace {

struct Entry {
    const char* name;
    const char* description;
    const char* oracle_kind;
};

constexpr Entry kScenarios[] = {
    {"zero", "n=2, m=1, sigma=1, H=0, g=0; every field vanishes", "closed-form"},
    {"linear-1d", "n=1, m=1, sigma=1, H=-y, g=x; y(t,x)=exp(-(T-t)) x", "closed-form"},
    {"coupled-ode", "n=2, m=1, sigma=1, H_1=y^2, H_2=y^1, g=1; y=exp(T-t), z=0", "ode"},
    {"quadratic-terminal", "n=1, m=1, sigma=1, H=0, g=x^2; y(t,x)=x^2+T-t", "closed-form"},
    {"stochastic-linear-growth-demo",
     "n=2, m=1, sigma=1, H_i=(1+|x|)|z^i|+arctan(y^j), g=cos x; finite-difference PDE reference", "pde"},
    {"linear-2d", "n=1, m=2, sigma=diag(1,2), H=-y, g=x_1+x_2; y(t,x)=exp(-(T-t))(x_1+x_2)", "closed-form"},
};

}  // namespace

std::vector<std::string> scenario_names() {
    std::vector<std::string> out;
    for (const auto& e : kScenarios) out.emplace_back(e.name);
    return out;
}

ProblemSpec make_scenario(const std::string& name) {
    ProblemSpec s;
    s.name = name;
    s.horizon_T = 1.0;
    s.start_t = 0.0;
    if (name == "zero") {
        s.diffusion = make_diffusion("identity", 1, {});
        s.generator = make_generator("zero", 2, 1, {});
        s.terminal = make_terminal("zero", 2, 1, {});
    } else if (name == "linear-1d") {
        s.diffusion = make_diffusion("identity", 1, {});
        s.generator = make_generator("linear-decay", 1, 1, {});
        s.terminal = make_terminal("linear", 1, 1, {});
    } else if (name == "coupled-ode") {
        s.diffusion = make_diffusion("identity", 1, {});
        s.generator = make_generator("cross-linear", 2, 1, {});
        s.terminal = make_terminal("constant", 2, 1, {});
    } else if (name == "quadratic-terminal") {
        s.diffusion = make_diffusion("identity", 1, {});
        s.generator = make_generator("zero", 1, 1, {});
        s.terminal = make_terminal("quadratic", 1, 1, {});
    } else if (name == "stochastic-linear-growth-demo") {
        s.diffusion = make_diffusion("identity", 1, {});
        s.generator = make_generator("demo", 2, 1, {});
        s.terminal = make_terminal("cosine", 2, 1, {});
    } else if (name == "linear-2d") {
        s.diffusion = make_diffusion("diagonal", 2, {{"d1", 1.0}, {"d2", 2.0}});
        s.generator = make_generator("linear-decay", 1, 2, {});
        s.terminal = make_terminal("linear", 1, 2, {});
    } else {
        throw ConfigError("scenario", "unknown scenario '" + name + "'");
    }
    s.start_x.assign(s.dim(), 0.0);
    s.check_consistency();
    return s;
}

std::vector<ScenarioInfo> list_scenarios(const std::filesystem::path& oracle_dir) {
    std::vector<ScenarioInfo> out;
    for (const auto& e : kScenarios) {
        ScenarioInfo info{e.name, e.description, e.oracle_kind, false};
        info.oracle_available = std::filesystem::exists(oracle_dir / (info.name + ".csv"));
        out.push_back(std::move(info));
    }
    return out;
}

}  // namespace bsdelab
