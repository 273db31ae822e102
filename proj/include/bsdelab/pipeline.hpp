#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "bsdelab/config.hpp"

namespace bsdelab {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitConfig = 2,
    kExitValidation = 3,
    kExitSolver = 4,
};

struct RunContext {
    RunConfig config;
    bool quiet = false;
    std::ostream* log = nullptr;
    std::vector<std::string> outputs;  // files written, relative to out_dir
};

// Subcommands on a resolved config. Each writes its reports into
// config.out_dir plus manifest.json and returns an exit code; errors are
// mapped to codes and reported on the log stream.
int run_command(const std::string& command, RunContext& context);

// Writes catalogue reference lattices (t step 0.05, x step 0.05 on [-6, 6])
// for every one-dimensional scenario into `dir`.
void write_oracle_files(const std::filesystem::path& dir, std::ostream* log);

void print_scenarios(std::ostream& out, const std::filesystem::path& oracle_dir);

}  // namespace bsdelab
