#include "bsdelab/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "bsdelab/catalogue.hpp"
#include "bsdelab/csv.hpp"
#include "bsdelab/domination.hpp"
#include "bsdelab/errors.hpp"
#include "bsdelab/girsanov.hpp"
#include "bsdelab/mollifier.hpp"
#include "bsdelab/oracle.hpp"

namespace bsdelab {

namespace {

constexpr const char* kVersion = "0.4.0";

class Runner {
public:
    explicit Runner(RunContext& ctx) : ctx_(ctx), cfg_(ctx.config) {}

    void say(const std::string& msg) const {
        if (!ctx_.quiet && ctx_.log) *ctx_.log << msg << '\n';
    }

    std::filesystem::path out(const std::string& name) {
        ctx_.outputs.push_back(name);
        return cfg_.out_dir / name;
    }

    bool validate() {
        const ValidationReport rep = validate_problem(cfg_.problem, cfg_.validation);
        {
            CsvWriter csv(out("validation.csv"), {"check", "worst_margin", "passed", "worst_point"});
            for (const auto& c : rep.checks) {
                std::string where = c.worst_point;
                for (auto& ch : where)
                    if (ch == ',') ch = ';';
                csv.row({c.name, std::isfinite(c.worst_margin) ? format_double(c.worst_margin) : std::string("inf"),
                         c.passed ? 1 : 0, where});
            }
        }
        {
            CsvWriter csv(out("continuity.csv"), {"perturbation", "max_change"});
            for (const auto& p : rep.continuity) csv.row({p.perturbation, p.max_change});
        }
        for (const auto& c : rep.checks)
            if (!c.passed) say("assumption check failed: " + c.name + " (worst margin " + std::to_string(c.worst_margin) + ")");
        return rep.passed();
    }

    const PathEnsemble& ensemble() {
        if (!ensemble_) {
            const TimeGrid grid = TimeGrid::uniform(cfg_.problem.horizon_T, cfg_.steps);
            ensemble_ = simulate(cfg_.problem.diffusion, grid, cfg_.problem.start_t, cfg_.problem.start_x,
                                 {cfg_.paths, cfg_.seed, cfg_.solver.workers});
        }
        return *ensemble_;
    }

    void simulate_reports() {
        const PathEnsemble& ens = ensemble();
        write_ensemble(ens, out("ensemble.bin"));
        CsvWriter csv(out("forward_moments.csv"), {"p", "ratio"});
        for (double p : {2.0, 4.0}) csv.row({p, moment_estimate_check(ens, p)});
        const EigenRange er = ellipticity_probe(cfg_.problem.diffusion, cfg_.problem.horizon_T,
                                                cfg_.validation.sample_count, cfg_.seed, cfg_.validation.box_radius);
        CsvWriter e(out("ellipticity.csv"), {"min_eigenvalue", "max_eigenvalue"});
        e.row({er.min_eigenvalue, er.max_eigenvalue});
    }

    std::vector<ProbePoint> probes() { return default_probes(ensemble(), cfg_.probe_times, cfg_.probe_states); }

    void write_probe_fields(const std::string& name, const ValueFields& fields, const std::vector<ProbePoint>& pts) {
        CsvWriter csv(out(name), {"t", "x", "component", "y", "z"});
        for (const auto& pt : pts) {
            const FieldValue v = evaluate_fields(fields, pt.node, pt.x);
            for (std::size_t i = 0; i < fields.components; ++i)
                csv.row({pt.t, pt.x[0], i, v.y[i], v.z(static_cast<Eigen::Index>(i), 0)});
        }
    }

    void solve() {
        const PathEnsemble& ens = ensemble();
        std::unique_ptr<Driver> driver;
        if (cfg_.solve_n > 0)
            driver = std::make_unique<MollifiedGenerator>(cfg_.problem.generator,
                                                          MollificationParams{cfg_.solve_n, cfg_.quad_order, "bump"});
        else
            driver = std::make_unique<RawDriver>(cfg_.problem.generator);
        const Solution sol = solve_backward(cfg_.problem, *driver, ens, cfg_.solver);
        save_fields(sol.fields, out("fields.txt"));
        {
            CsvWriter csv(out("solve_steps.csv"), {"node", "picard_iterations", "condition"});
            for (std::size_t k = 0; k <= ens.grid.steps(); ++k)
                csv.row({k, k < sol.stats.picard_iterations.size() ? sol.stats.picard_iterations[k] : 0ul,
                         sol.stats.condition[k]});
        }
        {
            CsvWriter csv(out("solve_summary.csv"), {"component", "y_moment", "z_energy", "max_picard_residual"});
            for (std::size_t i = 0; i < sol.fields.components; ++i)
                csv.row({i, sol.stats.y_moment[i], sol.stats.z_energy[i], sol.stats.max_picard_residual});
        }
        write_probe_fields("solve_probes.csv", sol.fields, probes());
    }

    SchemeOptions scheme_options() {
        SchemeOptions opt;
        opt.solver = cfg_.solver;
        opt.quad_order = cfg_.quad_order;
        opt.tolerance = cfg_.tolerance;
        opt.alpha = cfg_.alpha;
        opt.truncation_k = cfg_.truncation_k;
        const TimeGrid& grid = ensemble().grid;
        const double tg = cfg_.growth_time < 0.0 ? 0.5 * grid.horizon() : cfg_.growth_time;
        std::size_t node = 0;
        for (std::size_t k = 0; k <= grid.steps(); ++k)
            if (std::abs(grid.node(k) - tg) < std::abs(grid.node(node) - tg)) node = k;
        opt.growth_node = node;
        // Growth probes are kept only inside the sampled hull.
        const auto states = ensemble().node_states(node);
        const std::size_t m = ensemble().dim;
        std::vector<double> lo(m, INFINITY), hi(m, -INFINITY);
        for (std::size_t p = 0; p < ensemble().paths; ++p)
            for (std::size_t j = 0; j < m; ++j) {
                lo[j] = std::min(lo[j], states[p * m + j]);
                hi[j] = std::max(hi[j], states[p * m + j]);
            }
        std::vector<double> radii = cfg_.growth_states;
        if (radii.empty())
            for (int q = 0; q < 11; ++q) radii.push_back(0.3 * std::pow(10.0, q / 10.0));
        for (double r : radii)
            for (double sgn : {-1.0, 1.0}) {
                std::vector<double> x(m, sgn * r / std::sqrt(static_cast<double>(m)));
                bool inside = true;
                for (std::size_t j = 0; j < m; ++j) inside = inside && x[j] >= lo[j] && x[j] <= hi[j];
                if (inside) opt.growth_states.push_back(std::move(x));
            }
        return opt;
    }

    void certify() {
        CertifyOptions opt;
        opt.horizon = cfg_.problem.horizon_T;
        opt.compact_K = 2.0;
        opt.sample_count = cfg_.validation.sample_count;
        opt.seed = cfg_.seed;
        opt.quad_order = cfg_.quad_order;
        const PropertyReport rep = certify_properties(cfg_.problem.generator, cfg_.schedule.n_values, opt);
        write_property_csv(out("mollifier_properties.csv"), rep);
    }

    const SchemeResult& scheme() {
        if (!scheme_) {
            certify();
            scheme_ = run_scheme(cfg_.problem, cfg_.schedule, scheme_options(), probes(), ensemble());
            write_convergence_report(scheme_->report, cfg_.out_dir);
            for (const char* f : {"scheme_per_n.csv", "scheme_pairs.csv", "scheme_probes.csv", "gap_vs_n.dat"})
                ctx_.outputs.push_back(f);
            save_fields(scheme_->final_fields, out("fields.txt"));
            say(scheme_->report.converged ? "scheme converged at n = " + std::to_string(scheme_->report.converged_at)
                                          : "scheme did not reach the gap tolerance");
        }
        return *scheme_;
    }

    void girsanov() {
        const SchemeResult& sch = scheme();
        const PathEnsemble& ens = ensemble();
        const auto pts = probes();
        CsvWriter moments(out("girsanov_moments.csv"), {"n", "component", "p0", "moment", "stderr"});
        CsvWriter cmp(out("comparison.csv"),
                      {"n", "component", "t", "x", "y", "ybar_upper", "ybar_lower", "violation"});
        for (std::size_t s = 0; s < cfg_.schedule.n_values.size(); ++s) {
            const int n = cfg_.schedule.n_values[s];
            for (std::size_t i = 0; i < cfg_.problem.components(); ++i) {
                const Solution up = solve_dominating_bsde(cfg_.problem, n, ens, cfg_.solver, i, 1.0);
                const Solution lo = solve_dominating_bsde(cfg_.problem, n, ens, cfg_.solver, i, -1.0);
                const double rm = std::sqrt(double(ens.dim));
                const double bound = cfg_.problem.generator.growth_C2 * (1.0 + n * rm) * rm;
                const auto sample = stochastic_exponential(ens, dominating_integrand(cfg_.problem, n, up.fields, ens),
                                                           bound + 1e-12, "C2 (1 + |phi_n(X)|) sign(zbar)");
                for (double p0 : cfg_.p0_grid) {
                    const MomentEstimate est = p0_moment(sample, p0);
                    moments.row({n, i, p0, est.value, est.std_error});
                }
                const ComparisonResult res = comparison_check(sch.fields_by_n[s], i, up.fields, lo.fields, pts);
                for (const auto& r : res.rows) cmp.row({n, i, r.t, r.x[0], r.value, r.upper, r.lower, r.violation});
            }
        }
    }

    void dominate() {
        const ProblemSpec& p = cfg_.problem;
        if (p.dim() > 2) throw DimensionError("domination studies support m <= 2");
        const TimeGrid grid = TimeGrid::uniform(p.horizon_T, cfg_.steps);
        if (grid.index_of(cfg_.domination_t, 1e-9) < 0)
            throw ConfigError("domination.t", "must be a node of the time grid");
        const PathEnsemble base =
            simulate(p.diffusion, grid, p.start_t, p.start_x, {cfg_.paths, cfg_.seed, cfg_.solver.workers});
        const PathEnsemble shifted = simulate(p.diffusion, grid, cfg_.domination_t, cfg_.domination_x,
                                              {cfg_.paths, cfg_.seed + 1, cfg_.solver.workers});
        const BinSpec bins = default_bins(base, grid.steps(), cfg_.domination_bins);
        const RatioSeries series = ratio_series(shifted, base, cfg_.domination_t, cfg_.domination_delta, bins);
        write_ratio_csv(out("domination_ratios.csv"), series);
        const LqNorm norm = lq_norm(series, cfg_.domination_q, cfg_.domination_k);
        CsvWriter csv(out("domination_norms.csv"), {"q", "delta", "k", "norm", "infinite"});
        csv.row({cfg_.domination_q, cfg_.domination_delta, cfg_.domination_k, norm.infinite ? 0.0 : norm.value,
                 norm.infinite ? 1 : 0});
    }

    void manifest(const std::string& command, int status, const std::string& message) {
        nlohmann::json cfg = cfg_.resolved;
        cfg.erase("output.dir");
        const std::string canonical = cfg.dump();
        char hash[17];
        std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical)));
        nlohmann::json m;
        m["tool"] = "bsdelab";
        m["version"] = kVersion;
        m["command"] = command;
        m["config_hash"] = hash;
        m["seed"] = cfg_.seed;
        m["config"] = cfg;
        m["status"] = status;
        if (!message.empty()) m["message"] = message;
        m["outputs"] = ctx_.outputs;
        std::ofstream f(cfg_.out_dir / "manifest.json");
        f << m.dump(2) << '\n';
    }

private:
    RunContext& ctx_;
    const RunConfig& cfg_;
    std::optional<PathEnsemble> ensemble_;
    std::optional<SchemeResult> scheme_;
};

}  // namespace

int run_command(const std::string& command, RunContext& ctx) {
    std::filesystem::create_directories(ctx.config.out_dir);
    Runner run(ctx);
    int status = kExitOk;
    std::string message;
    try {
        if (command == "validate") {
            if (!run.validate()) status = kExitValidation;
        } else if (command == "simulate") {
            run.simulate_reports();
        } else if (command == "solve") {
            run.solve();
        } else if (command == "scheme") {
            run.scheme();
        } else if (command == "girsanov") {
            run.girsanov();
        } else if (command == "dominate") {
            run.dominate();
        } else if (command == "report") {
            if (!run.validate()) {
                status = kExitValidation;
            } else {
                run.scheme();
                if (ctx.config.girsanov) run.girsanov();
                if (ctx.config.domination) run.dominate();
            }
        } else {
            throw ConfigError("<command>", "unknown command '" + command + "'");
        }
    } catch (const ConfigError& e) {
        status = kExitConfig;
        message = e.what();
    } catch (const ValidationError& e) {
        status = kExitValidation;
        message = e.what();
    } catch (const SolverError& e) {
        status = kExitSolver;
        message = e.what();
    } catch (const SimulationError& e) {
        status = kExitSolver;
        message = e.what();
    } catch (const std::exception& e) {
        status = kExitFailure;
        message = e.what();
    }
    if (!message.empty() && ctx.log) *ctx.log << "error: " << message << '\n';
    run.manifest(command, status, message);
    return status;
}

void write_oracle_files(const std::filesystem::path& dir, std::ostream* log) {
    std::filesystem::create_directories(dir);
    std::vector<double> times, xs;
    for (int s = 0; s <= 20; ++s) times.push_back(0.05 * s);
    for (int j = -120; j <= 120; ++j) xs.push_back(0.05 * j);
    for (const auto& name : scenario_names()) {
        const ProblemSpec p = make_scenario(name);
        if (p.dim() != 1) continue;
        ReferenceSolution ref;
        const std::string kind = [&] {
            for (const auto& info : list_scenarios(dir))
                if (info.name == name) return info.oracle_kind;
            return std::string("none");
        }();
        if (kind == "pde") {
            const ReferenceSolution fine = solve_semilinear_pde(p, PdeGridSpec{}, times);
            ref.t = times;
            ref.x = xs;
            ref.components = fine.components;
            ref.values.resize(ref.components * times.size() * xs.size());
            for (std::size_t c = 0; c < ref.components; ++c)
                for (std::size_t s = 0; s < times.size(); ++s)
                    for (std::size_t j = 0; j < xs.size(); ++j)
                        ref.values[(c * times.size() + s) * xs.size() + j] = fine.value(c, times[s], xs[j]);
        } else if (kind == "closed-form" || kind == "ode") {
            ref = tabulate_closed_form(name, p.horizon_T, times, xs, p.components());
        } else {
            continue;
        }
        write_reference(ref, dir / (name + ".csv"));
        if (log) *log << "wrote " << (dir / (name + ".csv")).string() << '\n';
    }
}

void print_scenarios(std::ostream& out, const std::filesystem::path& oracle_dir) {
    for (const auto& s : list_scenarios(oracle_dir))
        out << std::left << std::setw(32) << s.name << std::setw(13) << s.oracle_kind
            << (s.oracle_available ? "oracle  " : "-       ") << s.description << '\n';
}

}  // namespace bsdelab
