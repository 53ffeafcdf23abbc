#pragma once

#include <optional>
#include <string>

#include "delayfolio/config.hpp"

namespace delayfolio::cli {

inline constexpr const char* kVersion = "0.1.0";

// exit codes
inline constexpr int kOk = 0;
inline constexpr int kVerifyFailure = 1;
inline constexpr int kConfigError = 2;
inline constexpr int kNumericError = 3;

struct Invocation {
    std::string command;          // simulate | riccati | pointwise | lsmc | martingale | verify | figure1
    std::optional<json> config;   // required except for figure1
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed_override;
    std::optional<int> paths_override;
    std::optional<int> steps_override;
    std::optional<int> workers_override;
    std::optional<std::uint64_t> env_seed;  // DELAYFOLIO_SEED fallback
};

// Runs one subcommand, writes outputs plus manifest.json under out_dir, and
// returns the process exit code. Never throws.
int run_command(const Invocation& inv);

}  // namespace delayfolio::cli
