#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bsdelab/core_model.hpp"

namespace bsdelab {

class TimeGrid {
public:
    TimeGrid() = default;
    // Strictly increasing and nonnegative; grids built by uniform() start at 0.
    explicit TimeGrid(std::vector<double> nodes);

    static TimeGrid uniform(double horizon, std::size_t steps);

    std::size_t steps() const { return nodes_.size() - 1; }
    double horizon() const { return nodes_.back(); }
    double node(std::size_t k) const { return nodes_[k]; }
    double dt(std::size_t k) const { return nodes_[k + 1] - nodes_[k]; }
    const std::vector<double>& nodes() const { return nodes_; }
    // Index of the node equal to t (within tol), or -1.
    long index_of(double t, double tol = 1e-9) const;
    // Smallest index with node >= t - tol.
    std::size_t first_at_or_after(double t, double tol = 1e-12) const;
    // Grid made of nodes[from..], keeping absolute times.
    TimeGrid suffix(std::size_t from) const;

    bool operator==(const TimeGrid&) const = default;

private:
    std::vector<double> nodes_{0.0, 1.0};
};

// Forward paths with their Brownian increments. States are stored as
// [node][path][dimension], increments as [step][path][dimension].
struct PathEnsemble {
    TimeGrid grid;
    std::size_t paths = 0;
    std::size_t dim = 1;
    std::uint64_t seed = 0;
    double start_t = 0.0;
    std::vector<double> start_x;
    // When true, X_0 was drawn uniformly from a box instead of a point.
    bool dispersed = false;
    std::vector<double> states;
    std::vector<double> increments;

    std::span<const double> state(std::size_t k, std::size_t p) const {
        return {states.data() + (k * paths + p) * dim, dim};
    }
    std::span<const double> increment(std::size_t k, std::size_t p) const {
        return {increments.data() + (k * paths + p) * dim, dim};
    }
    std::span<const double> node_states(std::size_t k) const {
        return {states.data() + k * paths * dim, paths * dim};
    }
    // Ensemble restricted to nodes >= from, with the same paths and increments.
    PathEnsemble suffix(std::size_t from) const;
};

struct SimulationOptions {
    std::size_t paths = 10000;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
};

// Increment of path p at step k is a pure function of (seed, p, k).
std::vector<double> brownian_increments(const TimeGrid& grid, std::size_t dim, const SimulationOptions& options);

// Euler-Maruyama driven by given increments; nodes with t_k <= start_t keep start_x.
// start_t must coincide with a grid node.
PathEnsemble integrate_paths(const DiffusionSpec& spec, const TimeGrid& grid, double start_t,
                             std::span<const double> start_x, std::vector<double> increments,
                             std::size_t paths, std::uint64_t seed, std::size_t workers);

PathEnsemble simulate(const DiffusionSpec& spec, const TimeGrid& grid, double start_t,
                      std::span<const double> start_x, const SimulationOptions& options);

// X_0 uniform on the box center +/- half_width; used to learn value fields
// over a wide state range.
PathEnsemble simulate_dispersed(const DiffusionSpec& spec, const TimeGrid& grid, std::span<const double> center,
                                double half_width, const SimulationOptions& options);

// Empirical E[sup_k |X_k|^p] / (1 + |x|^p).
double moment_estimate_check(const PathEnsemble& ensemble, double p);

struct EigenRange {
    double min_eigenvalue = 0.0;
    double max_eigenvalue = 0.0;
};

// Extreme sampled eigenvalues of sigma sigma^T over [0,T] x [-R,R]^m.
EigenRange ellipticity_probe(const DiffusionSpec& spec, double horizon, std::size_t sample_count,
                             std::uint64_t seed, double box_radius = 10.0);

// Binary layout (little-endian): "BSDEENS1", u64 m, u64 N, u64 P, u64 seed,
// then (N+1)*P*m doubles of states in [node][path][dimension] order.
void write_ensemble(const PathEnsemble& ensemble, const std::filesystem::path& file);
// Increments are regenerated from the stored seed on `grid`.
PathEnsemble read_ensemble(const std::filesystem::path& file, const TimeGrid& grid, double start_t = 0.0);

}  // namespace bsdelab
