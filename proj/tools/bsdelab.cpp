#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "bsdelab/errors.hpp"
#include "bsdelab/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Regression Monte Carlo laboratory for coupled Markovian BSDE systems"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;
    bool quiet = false;
    std::string oracle_dir = "data/oracles";

    const char* commands[][2] = {
        {"validate", "Check the standing assumptions by sampling"},
        {"simulate", "Simulate the forward ensemble and its moment diagnostics"},
        {"solve", "Single backward solve (raw driver or solver.mollify_n)"},
        {"scheme", "Run the mollification schedule and convergence report"},
        {"girsanov", "Dominating BSDE, p0 moments and comparison check"},
        {"dominate", "Transition-law domination ratios and Lq norm"},
        {"report", "validate, scheme and the diagnostics enabled in the config"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "Output directory (overrides output.dir)");
        sub->add_option("--seed", seed, "Override ensemble.seed");
        sub->add_option("--paths", paths, "Override ensemble.paths");
        sub->add_flag("--quiet", quiet, "Only report errors");
    }
    CLI::App* oracle = app.add_subcommand("oracle", "Write reference lattices for the catalogue");
    oracle->add_option("--out", out_dir, "Destination directory (default data/oracles)");
    oracle->add_flag("--quiet", quiet, "Only report errors");
    CLI::App* list = app.add_subcommand("list", "List catalogue scenarios");
    list->add_option("--oracles", oracle_dir, "Directory holding oracle files");

    CLI11_PARSE(app, argc, argv);

    CLI::App* chosen = app.get_subcommands().front();
    const std::string command = chosen->get_name();
    if (command == "list") {
        bsdelab::print_scenarios(std::cout, oracle_dir);
        return 0;
    }
    if (command == "oracle") {
        try {
            bsdelab::write_oracle_files(out_dir.empty() ? "data/oracles" : out_dir, quiet ? nullptr : &std::cout);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return bsdelab::kExitFailure;
        }
        return 0;
    }

    bsdelab::RunContext ctx;
    try {
        ctx.config = bsdelab::load_config(config_path);
        bsdelab::apply_overrides(ctx.config, seed, paths,
                                 out_dir.empty() ? std::nullopt : std::optional<std::filesystem::path>(out_dir));
    } catch (const bsdelab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return bsdelab::kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return bsdelab::kExitConfig;
    }
    ctx.quiet = quiet;
    ctx.log = &std::cerr;
    return bsdelab::run_command(command, ctx);
}
