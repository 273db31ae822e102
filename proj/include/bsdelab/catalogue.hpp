#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "bsdelab/core_model.hpp"

namespace bsdelab {

using ParamMap = std::map<std::string, double>;

// Building blocks addressable by id from configuration files. Unknown ids or
// parameter names throw ConfigError naming the offending field.
DiffusionSpec make_diffusion(const std::string& id, std::size_t m, const ParamMap& params);
GeneratorSpec make_generator(const std::string& id, std::size_t n, std::size_t m, const ParamMap& params);
TerminalSpec make_terminal(const std::string& id, std::size_t n, std::size_t m, const ParamMap& params);

std::vector<std::string> diffusion_ids();
std::vector<std::string> generator_ids();
std::vector<std::string> terminal_ids();

struct ScenarioInfo {
    std::string name;
    std::string description;
    std::string oracle_kind;  // "closed-form", "ode", "pde" or "none"
    bool oracle_available = false;
};

std::vector<std::string> scenario_names();
ProblemSpec make_scenario(const std::string& name);
// Oracle availability means <oracle_dir>/<name>.csv exists.
std::vector<ScenarioInfo> list_scenarios(const std::filesystem::path& oracle_dir);

}  // namespace bsdelab
