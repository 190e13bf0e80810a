// kandy <generate|train|discover|diagnose|all> --config <path> [--out <dir>] [--seed <u64>]
//
// Exit codes: 0 success, 1 unexpected error, 2 configuration/usage error,
// 3 training or rollout divergence, 4 I/O failure, 5 missing upstream artifact.

#include "kandy/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

enum Exit { ok = 0, failure = 1, schema = 2, divergence = 3, io = 4, missing = 5 };

int run(const std::string& command, const std::string& config_path, const std::string& out_dir,
        std::optional<std::uint64_t> seed) {
    kandy::ExperimentConfig cfg = kandy::load_config(config_path);
    if (seed) kandy::set_seed(cfg, *seed);
    kandy::Pipeline p(cfg, out_dir.empty() ? std::filesystem::path(cfg.output_dir) : std::filesystem::path(out_dir));
    if (command == "all") {
        p.run_all();
    } else if (command == "generate") {
        p.run(kandy::Stage::generate);
    } else if (command == "train") {
        p.run(kandy::Stage::train);
    } else if (command == "discover") {
        p.run(kandy::Stage::discover);
    } else {
        p.run(kandy::Stage::diagnose);
    }
    if (command == "discover" || command == "all") std::cout << kandy::read_text(p.path("equations.txt"));
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Zero-depth KAN equation discovery runner"};
    app.set_version_flag("--version", kandy::kVersion);
    app.require_subcommand(1, 1);

    std::string config_path, out_dir;
    std::uint64_t seed_value = 0;
    const std::pair<const char*, const char*> stages[] = {
        {"generate", "simulate the ground-truth system into data/"},
        {"train", "fit the model to the generated data"},
        {"discover", "extract symbolic equations from the trained model"},
        {"diagnose", "evaluate the trained and symbolic models"},
        {"all", "run every stage in order"},
    };
    for (const auto& [name, help] : stages) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "experiment TOML file")->required();
        sub->add_option("--out", out_dir, "artifact directory (overrides output_dir)");
        sub->add_option("--seed", seed_value, "global seed (overrides seed)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return schema;
    }

    const CLI::App* sub = app.get_subcommands().front();
    std::optional<std::uint64_t> seed;
    if (sub->count("--seed") > 0) seed = seed_value;

    try {
        return run(sub->get_name(), config_path, out_dir, seed);
    } catch (const kandy::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return schema;
    } catch (const kandy::DivergenceError& e) {
        std::cerr << "diverged: " << e.what() << "\n";
        return divergence;
    } catch (const kandy::MissingArtifactError& e) {
        std::cerr << "missing artifact: " << e.what() << "\n";
        return missing;
    } catch (const kandy::IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return io;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return io;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return failure;
    }
}
