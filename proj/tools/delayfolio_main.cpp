#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "delayfolio/cli.hpp"

namespace {

std::optional<delayfolio::json> load_config(const std::string& path) {
    if (path.empty()) return std::nullopt;
    std::ifstream in(path);
    if (!in) throw delayfolio::ConfigError("cannot open config file: " + path);
    delayfolio::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw delayfolio::ConfigError(std::string("config parse error: ") + e.what());
    }
    return j;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"delayfolio - portfolio optimization under delayed factor models"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int paths = 0, steps = 0, workers = -1;

    app.add_option("--config", config_path, "model/numerics config file (JSON)");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "RNG seed (overrides config)")->each([&](const std::string&) {
        seed_set = true;
    });
    app.add_option("--paths", paths, "Monte Carlo path count (overrides config)");
    app.add_option("--steps", steps, "time steps (overrides config)");
    app.add_option("--workers", workers, "worker threads, 0 = hardware (overrides config)");

    for (const char* name : {"simulate", "riccati", "pointwise", "lsmc", "martingale", "verify",
                             "figure1"})
        app.add_subcommand(name)->fallthrough();

    CLI11_PARSE(app, argc, argv);

    delayfolio::cli::Invocation inv;
    inv.command = app.get_subcommands().front()->get_name();
    inv.out_dir = out_dir;
    try {
        inv.config = load_config(config_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return delayfolio::cli::kConfigError;
    }
    if (seed_set) inv.seed_override = seed;
    if (paths > 0) inv.paths_override = paths;
    if (steps > 0) inv.steps_override = steps;
    if (workers >= 0) inv.workers_override = workers;
    if (const char* env = std::getenv("DELAYFOLIO_SEED")) {
        try {
            inv.env_seed = std::stoull(env);
        } catch (...) {
            std::cerr << "error: DELAYFOLIO_SEED is not a valid integer\n";
            return delayfolio::cli::kConfigError;
        }
    }

    const int code = delayfolio::cli::run_command(inv);
    if (code != delayfolio::cli::kOk) {
        std::cerr << "delayfolio " << inv.command << " exited with code " << code
                  << " (see manifest.json)\n";
    }
    return code;
}
