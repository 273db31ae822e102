#include "bsdelab/forward_sde.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "bsdelab/errors.hpp"
#include "bsdelab/parallel.hpp"
#include "bsdelab/rng.hpp"

namespace bsdelab {

TimeGrid::TimeGrid(std::vector<double> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.size() < 2) throw std::invalid_argument("time grid needs at least two nodes");
    if (!(nodes_.front() >= 0.0)) throw std::invalid_argument("time grid must start at a nonnegative time");
    for (std::size_t k = 1; k < nodes_.size(); ++k)
        if (!(nodes_[k] > nodes_[k - 1])) throw std::invalid_argument("time grid must be strictly increasing");
}

TimeGrid TimeGrid::uniform(double horizon, std::size_t steps) {
    if (steps < 1) throw std::invalid_argument("time grid needs at least one step");
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
    std::vector<double> nodes(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) nodes[k] = horizon * static_cast<double>(k) / static_cast<double>(steps);
    nodes.back() = horizon;
    return TimeGrid(std::move(nodes));
}

long TimeGrid::index_of(double t, double tol) const {
    for (std::size_t k = 0; k < nodes_.size(); ++k)
        if (std::abs(nodes_[k] - t) <= tol) return static_cast<long>(k);
    return -1;
}

std::size_t TimeGrid::first_at_or_after(double t, double tol) const {
    for (std::size_t k = 0; k < nodes_.size(); ++k)
        if (nodes_[k] >= t - tol) return k;
    return nodes_.size();
}

TimeGrid TimeGrid::suffix(std::size_t from) const {
    if (from >= steps()) throw std::invalid_argument("suffix must keep at least one step");
    return TimeGrid(std::vector<double>(nodes_.begin() + static_cast<long>(from), nodes_.end()));
}

PathEnsemble PathEnsemble::suffix(std::size_t from) const {
    PathEnsemble out;
    out.grid = grid.suffix(from);
    out.paths = paths;
    out.dim = dim;
    out.seed = seed;
    out.start_t = out.grid.node(0);
    out.dispersed = true;
    const std::size_t stride = paths * dim;
    out.states.assign(states.begin() + static_cast<long>(from * stride), states.end());
    out.increments.assign(increments.begin() + static_cast<long>(from * stride), increments.end());
    out.start_x.assign(out.states.begin(), out.states.begin() + static_cast<long>(dim));
    return out;
}

std::vector<double> brownian_increments(const TimeGrid& grid, std::size_t dim, const SimulationOptions& options) {
    const std::size_t N = grid.steps();
    const std::size_t P = options.paths;
    const std::size_t per_step = (dim + 1) / 2;
    std::vector<double> inc(N * P * dim);
    const Philox4x32 gen(derive_key(options.seed, StreamDomain::brownian));
    for_each_block(P, options.workers, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            for (std::size_t k = 0; k < N; ++k) {
                const double sdt = std::sqrt(grid.dt(k));
                double* out = inc.data() + (k * P + p) * dim;
                for (std::size_t b = 0; b < per_step; ++b) {
                    const auto z = normal_pair(gen(p, k * per_step + b));
                    out[2 * b] = sdt * z[0];
                    if (2 * b + 1 < dim) out[2 * b + 1] = sdt * z[1];
                }
            }
        }
    });
    return inc;
}

namespace {

void check_start(const TimeGrid& grid, double start_t) {
    if (grid.index_of(start_t, 1e-12) < 0)
        throw std::invalid_argument("start time " + std::to_string(start_t) + " is not a grid node");
}

void euler_paths(const DiffusionSpec& spec, PathEnsemble& ens, std::size_t first_step, std::size_t workers) {
    const std::size_t m = ens.dim;
    const std::size_t P = ens.paths;
    const std::size_t N = ens.grid.steps();
    for_each_block(P, workers, [&](std::size_t, std::size_t begin, std::size_t end) {
        std::vector<double> sig(m * m);
        std::vector<double> x(m), next(m);
        for (std::size_t p = begin; p < end; ++p) {
            for (std::size_t j = 0; j < m; ++j) x[j] = ens.states[p * m + j];
            for (std::size_t k = 0; k < N; ++k) {
                if (k >= first_step) {
                    spec.sigma(ens.grid.node(k), x, sig);
                    const double* db = ens.increments.data() + (k * P + p) * m;
                    next = x;
                    for (std::size_t a = 0; a < m; ++a)
                        for (std::size_t b = 0; b < m; ++b) next[a] += sig[a * m + b] * db[b];
                    for (std::size_t a = 0; a < m; ++a)
                        if (!std::isfinite(next[a])) throw SimulationError("non-finite forward state", k, p);
                    x.swap(next);
                }
                double* out = ens.states.data() + ((k + 1) * P + p) * m;
                for (std::size_t j = 0; j < m; ++j) out[j] = x[j];
            }
        }
    });
}

}  // namespace

PathEnsemble integrate_paths(const DiffusionSpec& spec, const TimeGrid& grid, double start_t,
                             std::span<const double> start_x, std::vector<double> increments,
                             std::size_t paths, std::uint64_t seed, std::size_t workers) {
    if (paths < 1) throw std::invalid_argument("path_count must be at least 1");
    if (start_x.size() != spec.dim_m) throw DimensionError("start state dimension does not match diffusion");
    check_start(grid, start_t);
    const std::size_t m = spec.dim_m;
    if (increments.size() != grid.steps() * paths * m) throw DimensionError("increment array has wrong size");

    PathEnsemble ens;
    ens.grid = grid;
    ens.paths = paths;
    ens.dim = m;
    ens.seed = seed;
    ens.start_t = start_t;
    ens.start_x.assign(start_x.begin(), start_x.end());
    ens.increments = std::move(increments);
    ens.states.resize((grid.steps() + 1) * paths * m);
    for (std::size_t p = 0; p < paths; ++p)
        for (std::size_t j = 0; j < m; ++j) ens.states[p * m + j] = start_x[j];
    euler_paths(spec, ens, static_cast<std::size_t>(grid.index_of(start_t, 1e-12)), workers);
    return ens;
}

PathEnsemble simulate(const DiffusionSpec& spec, const TimeGrid& grid, double start_t,
                      std::span<const double> start_x, const SimulationOptions& options) {
    if (options.paths < 1) throw std::invalid_argument("path_count must be at least 1");
    check_start(grid, start_t);
    return integrate_paths(spec, grid, start_t, start_x, brownian_increments(grid, spec.dim_m, options),
                           options.paths, options.seed, options.workers);
}

PathEnsemble simulate_dispersed(const DiffusionSpec& spec, const TimeGrid& grid, std::span<const double> center,
                                double half_width, const SimulationOptions& options) {
    const std::size_t m = spec.dim_m;
    if (center.size() != m) throw DimensionError("center dimension does not match diffusion");
    PathEnsemble ens;
    ens.grid = grid;
    ens.paths = options.paths;
    ens.dim = m;
    ens.seed = options.seed;
    ens.start_x.assign(center.begin(), center.end());
    ens.dispersed = true;
    ens.increments = brownian_increments(grid, m, options);
    ens.states.resize((grid.steps() + 1) * options.paths * m);
    const Philox4x32 gen(derive_key(options.seed, StreamDomain::start_law));
    for (std::size_t p = 0; p < options.paths; ++p) {
        UniformStream u(gen, p);
        for (std::size_t j = 0; j < m; ++j) ens.states[p * m + j] = center[j] + u.uniform(-half_width, half_width);
    }
    euler_paths(spec, ens, 0, options.workers);
    return ens;
}

double moment_estimate_check(const PathEnsemble& ensemble, double p) {
    if (ensemble.paths == 0) throw std::invalid_argument("ensemble is empty");
    if (!(p >= 2.0)) throw std::invalid_argument("moment order must be at least 2");
    std::vector<double> sup(ensemble.paths, 0.0);
    for (std::size_t path = 0; path < ensemble.paths; ++path) {
        double s = 0.0;
        for (std::size_t k = 0; k <= ensemble.grid.steps(); ++k) {
            const double v = euclidean_norm(ensemble.state(k, path));
            if (!std::isfinite(v)) throw SimulationError("non-finite state in ensemble", k, path);
            s = std::max(s, v);
        }
        sup[path] = std::pow(s, p);
    }
    return pairwise_mean(sup) / (1.0 + std::pow(euclidean_norm(ensemble.start_x), p));
}

EigenRange ellipticity_probe(const DiffusionSpec& spec, double horizon, std::size_t sample_count,
                             std::uint64_t seed, double box_radius) {
    if (sample_count < 1) throw std::invalid_argument("sample_count must be at least 1");
    const Philox4x32 gen(derive_key(seed, StreamDomain::validation));
    EigenRange range{std::numeric_limits<double>::infinity(), 0.0};
    std::vector<double> x(spec.dim_m);
    for (std::size_t s = 0; s < sample_count; ++s) {
        UniformStream u(gen, s);
        const double t = u.uniform(0.0, horizon);
        for (auto& v : x) v = u.uniform(-box_radius, box_radius);
        const Eigen::MatrixXd a = spec.matrix(t, x);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a * a.transpose(), Eigen::EigenvaluesOnly);
        range.min_eigenvalue = std::min(range.min_eigenvalue, std::max(eig.eigenvalues().minCoeff(), 0.0));
        range.max_eigenvalue = std::max(range.max_eigenvalue, eig.eigenvalues().maxCoeff());
    }
    return range;
}

namespace {
constexpr char kMagic[8] = {'B', 'S', 'D', 'E', 'E', 'N', 'S', '1'};

void put_u64(std::ofstream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::ifstream& in) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw DataError("truncated ensemble header");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[i]} << (8 * i);
    return v;
}
}  // namespace

void write_ensemble(const PathEnsemble& ensemble, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw DataError("cannot open " + file.string() + " for writing");
    out.write(kMagic, 8);
    put_u64(out, ensemble.dim);
    put_u64(out, ensemble.grid.steps());
    put_u64(out, ensemble.paths);
    put_u64(out, ensemble.seed);
    for (double v : ensemble.states) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        put_u64(out, bits);
    }
    if (!out) throw DataError("write failed for " + file.string());
}

PathEnsemble read_ensemble(const std::filesystem::path& file, const TimeGrid& grid, double start_t) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot open " + file.string());
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw DataError("not an ensemble file");
    PathEnsemble ens;
    ens.dim = get_u64(in);
    const std::size_t steps = get_u64(in);
    ens.paths = get_u64(in);
    ens.seed = get_u64(in);
    if (steps != grid.steps()) throw DataError("ensemble step count does not match the grid");
    ens.grid = grid;
    ens.start_t = start_t;
    ens.states.resize((steps + 1) * ens.paths * ens.dim);
    for (auto& v : ens.states) {
        const std::uint64_t bits = get_u64(in);
        std::memcpy(&v, &bits, 8);
    }
    ens.start_x.assign(ens.states.begin(), ens.states.begin() + static_cast<long>(ens.dim));
    ens.increments = brownian_increments(grid, ens.dim, {ens.paths, ens.seed, 1});
    return ens;
}

}  // namespace bsdelab
