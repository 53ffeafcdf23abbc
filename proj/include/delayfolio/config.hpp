#pragma once

#include <json.hpp>
#include <optional>
#include <string>

#include "delayfolio/closed_form.hpp"
#include "delayfolio/delay_sde.hpp"
#include "delayfolio/families.hpp"
#include "delayfolio/fbsde_solver.hpp"

namespace delayfolio {

using nlohmann::json;

// Strategy selection for the simulate subcommand.
struct StrategySpec {
    std::string kind = "zero";  // zero | constant | merton | closed_form
    VectorXd values;            // for kind == constant
};

struct VerifySpec {
    int n_times = 5;
    std::vector<double> perturbations{0.25, -0.25, 0.5, -0.5};
    double threshold = 3.0;
};

// Parsed, validated run configuration. Unknown keys anywhere are rejected.
struct RunConfig {
    ModelDims dims;
    VectorXd y0;
    PowerUtility utility;
    DelaySpec delay;
    std::string family;
    CoefficientSet coeffs;
    std::optional<LqParams> lq;  // set for the lq_* families

    double horizon = 1.0;
    int steps = 100;
    int paths = 10000;
    BasisSpec basis;
    int picard_sweeps = 2;
    double clip_bound = 50.0;
    std::optional<std::uint64_t> seed;
    int workers = 0;
    bool antithetic = false;
    int dump_paths = 100;

    StrategySpec strategy;
    VerifySpec verify;

    json canonical;  // effective config (after overrides), for hashing

    TimeGrid grid() const { return TimeGrid::make(horizon, steps); }
    SimOptions sim_options(std::uint64_t effective_seed) const {
        return SimOptions{effective_seed, workers, antithetic};
    }
};

RunConfig parse_config(const json& root);

// FNV-1a over the canonical serialization.
std::string config_hash(const json& canonical);

// Extension point: register a named coefficient-family factory usable from
// config files ("family": "<name>"). Built-in names cannot be overridden.
using FamilyFactory =
    std::function<CoefficientSet(const json& params, const PowerUtility& utility)>;
void register_family(const std::string& name, FamilyFactory factory);

}  // namespace delayfolio
