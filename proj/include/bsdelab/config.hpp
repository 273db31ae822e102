#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "bsdelab/approximation.hpp"
#include "bsdelab/bsde_solver.hpp"
#include "bsdelab/core_model.hpp"

namespace bsdelab {

// Everything a run needs, resolved from a JSON config. Nested objects are
// flattened to dotted keys ("ensemble.seed"); unknown keys are errors.
struct RunConfig {
    std::string scenario;
    ProblemSpec problem;

    std::size_t steps = 50;
    std::size_t paths = 10000;
    std::uint64_t seed = 0;

    ApproximationSchedule schedule;
    SolverConfig solver;
    int quad_order = 8;
    // Mollification index for the single `solve` command; 0 solves with the raw driver.
    int solve_n = 0;

    double tolerance = 1e-2;
    double alpha = 2.0;
    double truncation_k = 10.0;
    std::size_t probe_times = 5;
    std::size_t probe_states = 21;
    double growth_time = -1.0;  // negative: T / 2
    std::vector<double> growth_states;

    ValidationOptions validation;

    bool girsanov = false;
    std::vector<double> p0_grid;
    bool domination = false;
    double domination_t = 0.5;
    double domination_delta = 0.1;
    double domination_q = 2.0;
    double domination_k = 3.0;
    std::size_t domination_bins = 101;
    std::vector<double> domination_x;

    std::filesystem::path out_dir = "out";

    // Every recognized key with its effective value, used for the manifest.
    nlohmann::json resolved;
};

// Throws ConfigError naming the field path on missing, malformed or unknown keys.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& file);

// Rebuilds `problem` and `resolved` after programmatic edits (seed, paths, out_dir overrides).
void apply_overrides(RunConfig& config, std::optional<std::uint64_t> seed, std::optional<std::size_t> paths,
                     std::optional<std::filesystem::path> out_dir);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace bsdelab
