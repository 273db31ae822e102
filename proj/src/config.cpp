#include "bsdelab/config.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "bsdelab/catalogue.hpp"
#include "bsdelab/errors.hpp"
#include "bsdelab/girsanov.hpp"

namespace bsdelab {

namespace {

using nlohmann::json;

void flatten(const json& node, const std::string& prefix, std::map<std::string, json>& out) {
    if (node.is_object()) {
        for (auto it = node.begin(); it != node.end(); ++it)
            flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    } else {
        if (out.count(prefix)) throw ConfigError(prefix, "given twice");
        out[prefix] = node;
    }
}

class Reader {
public:
    explicit Reader(std::map<std::string, json> flat) : flat_(std::move(flat)) {}

    bool has(const std::string& key) const { return flat_.count(key) > 0; }

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
        const json* v = find(key, fallback.has_value());
        if (!v) return record(key, *fallback);
        if (!v->is_number()) throw ConfigError(key, "expected a number");
        return record(key, v->get<double>());
    }

    std::int64_t integer(const std::string& key, std::optional<std::int64_t> fallback = std::nullopt) {
        const json* v = find(key, fallback.has_value());
        if (!v) return record(key, *fallback);
        if (!v->is_number_integer()) throw ConfigError(key, "expected an integer");
        return record(key, v->get<std::int64_t>());
    }

    std::size_t count(const std::string& key, std::size_t fallback, std::size_t min = 1) {
        const auto v = integer(key, static_cast<std::int64_t>(fallback));
        if (v < static_cast<std::int64_t>(min)) throw ConfigError(key, "must be at least " + std::to_string(min));
        return static_cast<std::size_t>(v);
    }

    std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
        const json* v = find(key, fallback.has_value());
        if (!v) return record(key, *fallback);
        if (!v->is_string()) throw ConfigError(key, "expected a string");
        return record(key, v->get<std::string>());
    }

    bool flag(const std::string& key, bool fallback) {
        const json* v = find(key, true);
        if (!v) return record(key, fallback);
        if (!v->is_boolean()) throw ConfigError(key, "expected true or false");
        return record(key, v->get<bool>());
    }

    std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) {
        const json* v = find(key, true);
        if (!v) return record(key, fallback);
        std::vector<double> out;
        if (v->is_number()) {
            out.push_back(v->get<double>());
        } else if (v->is_array()) {
            for (const auto& e : *v) {
                if (!e.is_number()) throw ConfigError(key, "expected an array of numbers");
                out.push_back(e.get<double>());
            }
        } else {
            throw ConfigError(key, "expected a number or an array of numbers");
        }
        return record(key, out);
    }

    // Numeric parameters below a prefix, passed through to the catalogue.
    ParamMap params(const std::string& prefix) {
        ParamMap out;
        const std::string p = prefix + ".";
        for (const auto& [key, value] : flat_) {
            if (key.rfind(p, 0) != 0) continue;
            if (!value.is_number()) throw ConfigError(key, "expected a number");
            out[key.substr(p.size())] = value.get<double>();
            used_.insert(key);
            resolved_[key] = value;
        }
        return out;
    }

    void finish() const {
        for (const auto& [key, value] : flat_)
            if (!used_.count(key)) throw ConfigError(key, "unknown key");
    }

    const std::map<std::string, json>& resolved() const { return resolved_; }

private:
    const json* find(const std::string& key, bool optional) {
        auto it = flat_.find(key);
        if (it == flat_.end()) {
            if (!optional) throw ConfigError(key, "missing required field");
            return nullptr;
        }
        used_.insert(key);
        return &it->second;
    }

    template <class T>
    T record(const std::string& key, T value) {
        resolved_[key] = value;
        return value;
    }

    std::map<std::string, json> flat_;
    std::set<std::string> used_;
    std::map<std::string, json> resolved_;
};

ProblemSpec build_problem(Reader& r, const std::string& scenario) {
    if (scenario != "inline") {
        ProblemSpec p = make_scenario(scenario);
        p.horizon_T = r.number("problem.horizon", p.horizon_T);
        const auto x = r.numbers("problem.start_x", p.start_x);
        if (x.size() != p.dim()) throw ConfigError("problem.start_x", "length must equal the state dimension");
        p.start_x = x;
        return p;
    }
    const std::size_t m = r.count("problem.dim", 1);
    const std::size_t n = r.count("problem.components", 1);
    ProblemSpec p;
    p.name = r.text("problem.name", std::string("inline"));
    p.diffusion = make_diffusion(r.text("problem.diffusion.id"), m, r.params("problem.diffusion.params"));
    p.generator = make_generator(r.text("problem.generator.id"), n, m, r.params("problem.generator.params"));
    p.terminal = make_terminal(r.text("problem.terminal.id"), n, m, r.params("problem.terminal.params"));
    p.horizon_T = r.number("problem.horizon", 1.0);
    p.start_x = r.numbers("problem.start_x", std::vector<double>(m, 0.0));
    if (p.start_x.size() != m) throw ConfigError("problem.start_x", "length must equal the state dimension");
    p.start_t = 0.0;
    if (!(p.horizon_T > 0.0)) throw ConfigError("problem.horizon", "must be positive");
    try {
        p.check_consistency();
    } catch (const std::exception& e) {
        throw ConfigError("problem", e.what());
    }
    return p;
}

std::vector<int> to_ints(const std::string& key, const std::vector<double>& v) {
    std::vector<int> out;
    for (double d : v) {
        if (d != std::floor(d) || d < 1 || d > 1e6) throw ConfigError(key, "entries must be positive integers");
        out.push_back(static_cast<int>(d));
    }
    return out;
}

}  // namespace

RunConfig parse_config(const json& doc) {
    if (!doc.is_object()) throw ConfigError("<root>", "config must be a JSON object");
    std::map<std::string, json> flat;
    flatten(doc, "", flat);
    Reader r(std::move(flat));
    RunConfig c;

    c.scenario = r.text("scenario");
    c.problem = build_problem(r, c.scenario);

    c.steps = r.count("grid.steps", 50);
    c.paths = r.count("ensemble.paths", 10000, 2);
    const auto seed = r.integer("ensemble.seed");
    if (seed < 0) throw ConfigError("ensemble.seed", "must be nonnegative");
    c.seed = static_cast<std::uint64_t>(seed);

    c.schedule.n_values = to_ints("schedule.n", r.numbers("schedule.n", {2, 4, 8, 16, 32}));
    const std::string policy = r.text("schedule.paths", std::string("reuse"));
    if (policy == "reuse")
        c.schedule.policy = PathPolicy::reuse;
    else if (policy == "fresh")
        c.schedule.policy = PathPolicy::fresh;
    else
        throw ConfigError("schedule.paths", "expected \"reuse\" or \"fresh\"");
    try {
        c.schedule.check();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("schedule.n", e.what());
    }

    try {
        c.solver.basis.kind = basis_kind_from_string(r.text("solver.basis", std::string("poly")));
    } catch (const std::invalid_argument& e) {
        throw ConfigError("solver.basis", e.what());
    }
    c.solver.basis.degree_or_bins = static_cast<int>(r.count("solver.degree", 5));
    c.solver.basis.ridge_lambda = r.number("solver.ridge", 1e-8);
    if (c.solver.basis.ridge_lambda < 0.0) throw ConfigError("solver.ridge", "must be nonnegative");
    c.solver.picard_tol = r.number("solver.picard_tol", 1e-10);
    if (!(c.solver.picard_tol > 0.0)) throw ConfigError("solver.picard_tol", "must be positive");
    c.solver.picard_max = r.count("solver.picard_max", 100);
    c.solver.workers = r.count("solver.workers", 1);
    c.quad_order = static_cast<int>(r.count("solver.quad_order", 8, 2));
    c.solve_n = static_cast<int>(r.count("solver.mollify_n", 0, 0));

    c.tolerance = r.number("scheme.tolerance", 1e-2);
    c.alpha = r.number("scheme.alpha", 2.0);
    if (!(c.alpha > 1.0)) throw ConfigError("scheme.alpha", "must exceed 1");
    c.solver.alpha = c.alpha;
    c.truncation_k = r.number("scheme.truncation_k", 10.0);
    c.probe_times = r.count("scheme.probe_times", 5);
    c.probe_states = r.count("scheme.probe_states", 21);
    c.growth_time = r.number("growth.time", -1.0);
    c.growth_states = r.numbers("growth.states", {});

    c.validation.sample_count = r.count("validation.samples", 10000);
    c.validation.box_radius = r.number("validation.box_radius", 10.0);
    c.validation.seed = c.seed;

    c.girsanov = r.flag("diagnostics.girsanov", false);
    c.p0_grid = r.numbers("girsanov.p0", kDefaultP0Grid);
    for (double p0 : c.p0_grid)
        if (!(p0 > 1.0 && p0 < 2.0)) throw ConfigError("girsanov.p0", "values must lie in (1, 2)");
    c.domination = r.flag("diagnostics.domination", false);
    c.domination_t = r.number("domination.t", 0.5);
    c.domination_delta = r.number("domination.delta", 0.1);
    if (!(c.domination_delta > 0.0)) throw ConfigError("domination.delta", "must be positive");
    c.domination_q = r.number("domination.q", 2.0);
    if (!(c.domination_q > 1.0)) throw ConfigError("domination.q", "must exceed 1");
    c.domination_k = r.number("domination.k", 3.0);
    c.domination_bins = r.count("domination.bins", 101);
    c.domination_x = r.numbers("domination.x", c.problem.start_x);
    if (c.domination_x.size() != c.problem.dim())
        throw ConfigError("domination.x", "length must equal the state dimension");

    c.out_dir = r.text("output.dir", std::string("out"));
    r.finish();

    c.resolved = json::object();
    for (const auto& [key, value] : r.resolved()) c.resolved[key] = value;
    return c;
}

RunConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("<file>", "cannot read " + file.string());
    json doc;
    try {
        doc = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError("<file>", std::string("malformed JSON: ") + e.what());
    }
    return parse_config(doc);
}

void apply_overrides(RunConfig& c, std::optional<std::uint64_t> seed, std::optional<std::size_t> paths,
                     std::optional<std::filesystem::path> out_dir) {
    if (seed) {
        c.seed = *seed;
        c.validation.seed = *seed;
        c.resolved["ensemble.seed"] = *seed;
    }
    if (paths) {
        if (*paths < 2) throw ConfigError("ensemble.paths", "must be at least 2");
        c.paths = *paths;
        c.resolved["ensemble.paths"] = *paths;
    }
    if (out_dir) {
        c.out_dir = *out_dir;
        c.resolved["output.dir"] = out_dir->string();
    }
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace bsdelab
