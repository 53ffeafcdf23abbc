#include "delayfolio/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>

#include "delayfolio/csv.hpp"
#include "delayfolio/martingale_method.hpp"
#include "delayfolio/verify.hpp"

namespace delayfolio::cli {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct RunContext {
    json manifest;
    fs::path out;
    Clock::time_point t0 = Clock::now();
    Clock::time_point stage_start = Clock::now();

    void stage_done(const std::string& name) {
        const auto now = Clock::now();
        manifest["timings_ms"][name] =
            std::chrono::duration_cast<std::chrono::milliseconds>(now - stage_start).count();
        stage_start = now;
    }
    void add_output(const std::string& name) { manifest["outputs"].push_back(name); }
    void note(const std::string& s) { manifest["notes"].push_back(s); }
};

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string());
    out << j.dump(2) << "\n";
}

json default_figure1_config() {
    return json{
        {"model",
         {{"dims", {{"assets", 1}, {"factors", 1}, {"noise", 1}}},
          {"initial_factor", {1.0}},
          {"utility", {{"gamma", 0.5}, {"initial_wealth", 1.0}}},
          {"delay", {{"lambda", 1.0}, {"delta", "inf"}, {"history", {{"type", "constant"}}}}},
          {"coefficients",
           {{"family", "lq_infinite"},
            {"alpha", {1.0, 1.0}},
            {"beta", {-2.0, -2.0}},
            {"theta0", 0.0},
            {"sigma", 0.2},
            {"sigma_F", 1.0}}}}},
        {"numerics",
         {{"horizon", 1.0}, {"steps", 1000}, {"paths", 2}, {"basis_degree", 2}}},
    };
}

LqParams require_lq(const RunConfig& cfg, const std::string& family) {
    if (cfg.family != family || !cfg.lq)
        throw ConfigError("this subcommand requires model.coefficients.family = '" + family + "'");
    return *cfg.lq;
}

Strategy build_strategy(const RunConfig& cfg, const TimeGrid& grid) {
    const auto& spec = cfg.strategy;
    if (spec.kind == "zero") {
        const int m = cfg.dims.m;
        return [m](double, const FactorState&) { return VectorXd::Zero(m); };
    }
    if (spec.kind == "constant") {
        if (spec.values.size() != cfg.dims.m)
            throw ConfigError("simulate.strategy.values: wrong dimension");
        VectorXd v = spec.values;
        return [v](double, const FactorState&) { return v; };
    }
    if (spec.kind == "merton") {
        const CoefficientSet coeffs = cfg.coeffs;
        const PowerUtility u = cfg.utility;
        const int N = cfg.dims.N;
        return [coeffs, u, N](double, const FactorState& s) {
            return optimal_pi_from_qhat(coeffs, u, s, VectorXd::Zero(N)).total();
        };
    }
    // closed_form
    if (cfg.family == "lq_pointwise") {
        const PointwiseSolution sol = pointwise_solution(require_lq(cfg, "lq_pointwise"));
        const CoefficientSet coeffs = cfg.coeffs;
        const PowerUtility u = cfg.utility;
        return [sol, coeffs, u](double t, const FactorState& s) {
            return pointwise_pi(sol, coeffs, u, t, s).total();
        };
    }
    if (cfg.family == "lq_infinite") {
        LqParams lp = require_lq(cfg, "lq_infinite");
        lp.T = grid.T;
        auto sol = std::make_shared<RiccatiSolution>(solve_riccati(lp, RiccatiOptions{2000, 1e8}));
        const CoefficientSet coeffs = cfg.coeffs;
        const PowerUtility u = cfg.utility;
        return [sol, coeffs, u](double t, const FactorState& s) {
            return optimal_pi_infinite(*sol, coeffs, u, t, s.y(0), s.v).total();
        };
    }
    throw ConfigError("simulate.strategy.kind 'closed_form' requires an lq_* family");
}

void cmd_simulate(const RunConfig& cfg, std::uint64_t seed, RunContext& ctx) {
    const TimeGrid grid = cfg.grid();
    const PathBundle bundle =
        simulate_factors(cfg.coeffs, cfg.delay, grid, cfg.y0, cfg.paths, cfg.sim_options(seed));
    ctx.stage_done("simulate_factors");
    const Strategy strategy = build_strategy(cfg, grid);
    const WealthPaths wealth = simulate_wealth(bundle, cfg.coeffs, cfg.utility, strategy, cfg.workers);
    ctx.stage_done("simulate_wealth");

    CsvWriter csv((ctx.out / "paths.csv").string());
    std::vector<std::string> cols{"t", "path_id"};
    for (int c = 0; c < bundle.n; ++c) cols.push_back("Y" + std::to_string(c + 1));
    cols.push_back("V");
    for (int c = 0; c < bundle.n; ++c) cols.push_back("Z" + std::to_string(c + 1));
    cols.push_back("X");
    cols.push_back("Xtilde");
    for (int c = 0; c < cfg.dims.m; ++c) cols.push_back("pi" + std::to_string(c + 1));
    csv.header(cols);
    const int dump = std::min(cfg.dump_paths, cfg.paths);
    for (int k = 0; k <= grid.K; ++k) {
        for (int p = 0; p < dump; ++p) {
            const FactorState s = bundle.state(k, static_cast<std::size_t>(p));
            csv.field(grid.t(k));
            csv.field(static_cast<long>(p));
            for (int c = 0; c < bundle.n; ++c) csv.field(s.y(c));
            csv.field(s.v);
            for (int c = 0; c < bundle.n; ++c) csv.field(s.z(c));
            csv.field(wealth.x(k, static_cast<std::size_t>(p)));
            csv.field(wealth.xtilde(k, static_cast<std::size_t>(p)));
            const VectorXd pi = strategy(grid.t(k), s);
            for (int c = 0; c < cfg.dims.m; ++c) csv.field(pi(c));
            csv.end_row();
        }
    }
    ctx.add_output("paths.csv");
    ctx.stage_done("write_csv");
}

void write_riccati_csv(const fs::path& path, const RiccatiSolution& sol) {
    CsvWriter csv(path.string());
    csv.header({"t", "psi1", "psi2", "psi3", "psi4"});
    for (int k = 0; k <= sol.K; ++k) {
        csv.field(sol.t(k));
        for (int i = 0; i < 4; ++i) csv.field(sol.psi[i][k]);
        csv.end_row();
    }
}

void cmd_riccati(const RunConfig& cfg, RunContext& ctx) {
    LqParams lp = require_lq(cfg, "lq_infinite");
    lp.T = cfg.horizon;
    const RiccatiSolution sol = solve_riccati(lp, RiccatiOptions{cfg.steps, 1e8});
    ctx.stage_done("solve_riccati");
    write_riccati_csv(ctx.out / "riccati.csv", sol);
    ctx.add_output("riccati.csv");
    ctx.note("psi4 right-hand side uses sigma_F^2 (zero-order PDE coefficient)");
    ctx.stage_done("write_csv");
}

void cmd_figure1(const std::optional<RunConfig>& maybe_cfg, RunContext& ctx) {
    LqParams lp;
    lp.alpha1 = 1.0;
    lp.alpha2 = 1.0;
    lp.beta1 = -2.0;
    lp.beta2 = -2.0;
    lp.lambda = 1.0;
    lp.sigma_F = 1.0;
    lp.gamma = 0.5;
    lp.T = 1.0;
    const int steps = maybe_cfg ? maybe_cfg->steps : 1000;
    const RiccatiSolution sol = solve_riccati(lp, RiccatiOptions{steps, 1e8});
    ctx.stage_done("solve_riccati");
    write_riccati_csv(ctx.out / "figure1.csv", sol);
    ctx.add_output("figure1.csv");
    ctx.note("psi4 right-hand side uses sigma_F^2 (zero-order PDE coefficient)");
    ctx.stage_done("write_csv");
}

void cmd_pointwise(const RunConfig& cfg, RunContext& ctx) {
    LqParams lp = require_lq(cfg, "lq_pointwise");
    lp.T = cfg.horizon;
    const PointwiseSolution sol = pointwise_solution(lp);
    ctx.stage_done("solve");
    CsvWriter csv((ctx.out / "pointwise.csv").string());
    csv.header({"t", "Q", "psi", "qhat"});
    const TimeGrid grid = cfg.grid();
    for (int k = 0; k <= grid.K; ++k) {
        const double t = grid.t(k);
        csv.field(t);
        csv.field(sol.Q(t));
        csv.field(sol.psi(t));
        csv.field(sol.qhat(t));
        csv.end_row();
    }
    ctx.add_output("pointwise.csv");
    ctx.note("psi uses (T - t) in the linear term");
    ctx.note("dV pointwise-delay coefficient uses exp(-lambda delta)");
    ctx.stage_done("write_csv");
}

QhatField lsmc_qhat_field(const BsdeGridSolution& sol) {
    return [&sol](int k, std::size_t, const FactorState& s) { return sol.qhat_at(k, s); };
}

void cmd_lsmc(const RunConfig& cfg, std::uint64_t seed, RunContext& ctx) {
    const TimeGrid grid = cfg.grid();
    const PathBundle bundle =
        simulate_factors(cfg.coeffs, cfg.delay, grid, cfg.y0, cfg.paths, cfg.sim_options(seed));
    ctx.stage_done("simulate_factors");
    LsmcOptions opts;
    opts.basis = cfg.basis;
    opts.picard_sweeps = cfg.picard_sweeps;
    opts.clip_bound = cfg.clip_bound;
    opts.workers = cfg.workers;
    const BsdeGridSolution sol = lsmc_solve(bundle, cfg.coeffs, cfg.utility, opts);
    ctx.stage_done("lsmc_solve");
    const ContractionDiagnostics diag =
        contraction_diagnostics(bundle, cfg.coeffs, cfg.utility, cfg.workers);
    ctx.stage_done("diagnostics");

    json summary{
        {"p_hat_0", sol.p_hat_0},
        {"value", value_at_zero(sol.p_hat_0, cfg.utility)},
        {"clip_count", sol.clip_count},
        {"picard_deltas", sol.picard_deltas},
        {"diagnostics",
         {{"xi_sup", diag.xi_sup},
          {"xi_mean", diag.xi_mean},
          {"beta", diag.beta},
          {"beta_statement", diag.beta_statement},
          {"bound", diag.bound},
          {"radius", diag.radius},
          {"smallness_holds", diag.smallness_holds}}},
    };
    write_json(ctx.out / "lsmc_summary.json", summary);
    ctx.add_output("lsmc_summary.json");

    CsvWriter csv((ctx.out / "lsmc_coeffs.csv").string());
    csv.header({"k", "t", "target", "term", "coef"});
    for (int k = 0; k <= grid.K; ++k) {
        for (int t = 0; t < sol.basis.n_terms(); ++t) {
            csv.field(static_cast<long>(k));
            csv.field(grid.t(k));
            csv.field(std::string("p"));
            csv.field(static_cast<long>(t));
            csv.field(sol.coef_p[k](t));
            csv.end_row();
        }
        for (int c = 0; c < bundle.N; ++c) {
            for (int t = 0; t < sol.basis.n_terms(); ++t) {
                csv.field(static_cast<long>(k));
                csv.field(grid.t(k));
                csv.field("q" + std::to_string(c + 1));
                csv.field(static_cast<long>(t));
                csv.field(sol.coef_q[k](c, t));
                csv.end_row();
            }
        }
    }
    ctx.add_output("lsmc_coeffs.csv");
    ctx.stage_done("write_outputs");
}

void cmd_martingale(const RunConfig& cfg, std::uint64_t seed, RunContext& ctx) {
    if (!cfg.dims.complete())
        throw ConfigError("martingale: requires a complete market (assets == noise)");
    const TimeGrid grid = cfg.grid();
    const PathBundle bundle =
        simulate_factors(cfg.coeffs, cfg.delay, grid, cfg.y0, cfg.paths, cfg.sim_options(seed));
    ctx.stage_done("simulate_factors");
    const std::vector<double> H = simulate_H0(bundle, cfg.coeffs, cfg.workers);
    ctx.stage_done("simulate_H0");
    const MartingaleSolution sol =
        estimate_M_and_psi(bundle, H, cfg.utility, cfg.basis, cfg.workers);
    ctx.stage_done("estimate_M_psi");

    // strategy and BSDE-side dual from the Theorem 4.1 correspondence
    const double gam = cfg.utility.gamma;
    const CoefficientSet& coeffs = cfg.coeffs;
    PathStrategy pi_hat = [&](int k, std::size_t p, const FactorState&) {
        return pi_from_martingale(sol, bundle, coeffs, k, p);
    };
    const WealthPaths wealth =
        simulate_wealth_indexed(bundle, coeffs, cfg.utility, pi_hat, cfg.workers);
    QhatField qfield = [&](int k, std::size_t p, const FactorState& s) {
        const VectorXd theta = eval_theta(coeffs, s);
        const double m_val = sol.m_at(k, p);
        VectorXd q(bundle.N);
        for (int c = 0; c < bundle.N; ++c)
            q(c) = -gam * theta(c) + (1.0 - gam) * sol.psi_at(k, c, p) / m_val;
        return q;
    };
    const std::vector<double> phat_paths = simulate_phat(
        bundle, coeffs, cfg.utility, qfield, std::log(sol.phiZx.Zx), cfg.workers);
    const Theorem41Report rep =
        check_theorem41(sol, bundle, H, wealth, phat_paths, cfg.utility,
                        std::max(1, grid.K / 10));
    ctx.stage_done("theorem41");

    json summary{
        {"phi", sol.phiZx.phi},
        {"phi_se", sol.phiZx.phi_se},
        {"Zx", sol.phiZx.Zx},
        {"M0", sol.M0},
        {"M0_se", sol.M0_se},
        {"pT_mean", rep.pT_mean},
        {"pT_se", rep.pT_se},
        {"eq20_relerr_q50", rep.eq20_q50},
        {"eq20_relerr_q95", rep.eq20_q95},
        {"eq21_relerr_q50", rep.eq21_q50},
        {"eq21_relerr_q95", rep.eq21_q95},
    };
    write_json(ctx.out / "martingale_summary.json", summary);
    ctx.add_output("martingale_summary.json");
    ctx.stage_done("write_outputs");
}

int cmd_verify(const RunConfig& cfg, std::uint64_t seed, RunContext& ctx) {
    const TimeGrid grid = cfg.grid();
    const PathBundle bundle =
        simulate_factors(cfg.coeffs, cfg.delay, grid, cfg.y0, cfg.paths, cfg.sim_options(seed));
    ctx.stage_done("simulate_factors");
    LsmcOptions opts;
    opts.basis = cfg.basis;
    opts.picard_sweeps = cfg.picard_sweeps;
    opts.clip_bound = cfg.clip_bound;
    opts.workers = cfg.workers;
    const BsdeGridSolution sol = lsmc_solve(bundle, cfg.coeffs, cfg.utility, opts);
    ctx.stage_done("lsmc_solve");

    const CoefficientSet& coeffs = cfg.coeffs;
    const PowerUtility& u = cfg.utility;
    PathStrategy pi_hat = [&](int k, std::size_t, const FactorState& s) {
        return optimal_pi_from_qhat(coeffs, u, s, sol.qhat_at(k, s)).total();
    };
    const WealthPaths wealth = simulate_wealth_indexed(bundle, coeffs, u, pi_hat, cfg.workers);
    const std::vector<double> phat_paths =
        simulate_phat(bundle, coeffs, u, lsmc_qhat_field(sol), sol.p_hat_0, cfg.workers);
    ctx.stage_done("simulate_optimal");

    std::vector<TestReport> reports;
    reports.push_back(
        martingale_test(bundle, wealth.Xtilde, phat_paths, u, seed, cfg.verify.n_times,
                        cfg.verify.threshold));

    // supermartingale check for a deliberately suboptimal strategy
    {
        PathStrategy shifted = [&](int k, std::size_t p, const FactorState& s) {
            VectorXd v = pi_hat(k, p, s);
            v.array() += 0.5;
            return v;
        };
        const WealthPaths w2 = simulate_wealth_indexed(bundle, coeffs, u, shifted, cfg.workers);
        TestReport rep = supermartingale_test(bundle, w2.Xtilde, phat_paths, u, seed,
                                              cfg.verify.n_times, cfg.verify.threshold);
        rep.name = "supermartingale_shifted";
        reports.push_back(rep);
    }

    // dominance against perturbed strategies under common random numbers
    {
        std::vector<Strategy> candidates;
        for (double eps : cfg.verify.perturbations) {
            candidates.push_back([&coeffs, &u, &sol, eps](double t, const FactorState& s) {
                const int k = std::min(static_cast<int>(t / sol.grid.dt()), sol.grid.K - 1);
                VectorXd v = optimal_pi_from_qhat(coeffs, u, s, sol.qhat_at(k, s)).total();
                v.array() += eps;
                return v;
            });
        }
        const double value0 = value_at_zero(sol.p_hat_0, u);
        Strategy pi_hat_t = [&](double t, const FactorState& s) {
            const int k = std::min(static_cast<int>(t / sol.grid.dt()), sol.grid.K - 1);
            return optimal_pi_from_qhat(coeffs, u, s, sol.qhat_at(k, s)).total();
        };
        auto dom = utility_dominance_test(bundle, coeffs, u, pi_hat_t, candidates, value0, seed,
                                          cfg.workers, cfg.verify.threshold);
        reports.insert(reports.end(), dom.begin(), dom.end());
    }

    // Hamiltonian first-order condition at the initial state
    {
        const FactorState s0 = bundle.state(0, 0);
        const VectorXd q0 = sol.qhat_at(0, s0);
        const ArgmaxReport am = argmax_check(u, coeffs, s0, 1.0, q0);
        TestReport rep;
        rep.name = "hamiltonian_argmax";
        rep.statistic = am.max_component_diff;
        rep.threshold = 1e-5;
        rep.passed = am.max_component_diff < 1e-5;
        rep.seed = seed;
        rep.n_paths = cfg.paths;
        rep.dt = grid.dt();
        rep.note = "numeric coordinate search vs first-order condition";
        reports.push_back(rep);
    }
    ctx.stage_done("tests");

    json arr = json::array();
    bool all_pass = true;
    for (const auto& r : reports) {
        arr.push_back(json{{"name", r.name},
                           {"statistic", r.statistic},
                           {"threshold", r.threshold},
                           {"passed", r.passed},
                           {"seed", r.seed},
                           {"n_paths", r.n_paths},
                           {"dt", r.dt},
                           {"note", r.note}});
        all_pass = all_pass && r.passed;
    }
    write_json(ctx.out / "verify_report.json", arr);
    ctx.add_output("verify_report.json");
    ctx.stage_done("write_outputs");
    return all_pass ? kOk : kVerifyFailure;
}

}  // namespace

int run_command(const Invocation& inv) {
    RunContext ctx;
    ctx.out = inv.out_dir;
    ctx.manifest["command"] = inv.command;
    ctx.manifest["version"] = kVersion;
    ctx.manifest["outputs"] = json::array();
    ctx.manifest["notes"] = json::array();
    ctx.manifest["timings_ms"] = json::object();
    ctx.manifest["status"] = "error";

    auto finish = [&](int code) {
        ctx.manifest["total_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                                       Clock::now() - ctx.t0)
                                       .count();
        std::error_code ec;
        fs::create_directories(ctx.out, ec);
        try {
            write_json(ctx.out / "manifest.json", ctx.manifest);
        } catch (...) {
            // nothing else to do; keep the original exit code
        }
        return code;
    };

    try {
        std::error_code ec;
        fs::create_directories(ctx.out, ec);

        json effective;
        std::optional<RunConfig> cfg;
        if (inv.config) {
            effective = *inv.config;
        } else if (inv.command == "figure1") {
            effective = default_figure1_config();
        } else {
            throw ConfigError("missing --config (required for every subcommand except figure1)");
        }
        if (inv.paths_override) effective["numerics"]["paths"] = *inv.paths_override;
        if (inv.steps_override) effective["numerics"]["steps"] = *inv.steps_override;
        if (inv.workers_override) effective["numerics"]["workers"] = *inv.workers_override;
        if (inv.seed_override) effective["numerics"]["seed"] = *inv.seed_override;

        cfg = parse_config(effective);
        std::uint64_t seed = 12345;
        if (inv.seed_override)
            seed = *inv.seed_override;
        else if (cfg->seed)
            seed = *cfg->seed;
        else if (inv.env_seed)
            seed = *inv.env_seed;

        // canonical config for hashing: effective config with the resolved
        // seed and without the scheduling knob
        json canonical = effective;
        canonical["numerics"]["seed"] = seed;
        canonical["numerics"].erase("workers");
        ctx.manifest["config_hash"] = config_hash(canonical);
        ctx.manifest["seed"] = seed;
        ctx.manifest["paths"] = cfg->paths;
        ctx.manifest["steps"] = cfg->steps;
        ctx.manifest["workers"] = cfg->workers;
        if (!cfg->delay.infinite()) {
            const TimeGrid grid = cfg->grid();
            const int lag = grid.lag_steps(cfg->delay.delta);
            const double snapped = lag * grid.dt();
            ctx.manifest["delay_lag_steps"] = lag;
            if (std::abs(snapped - cfg->delay.delta) > 1e-12)
                ctx.note("delay lag snapped to " + std::to_string(snapped) +
                         " (config delta = " + std::to_string(cfg->delay.delta) + ")");
        }
        ctx.stage_done("setup");

        int code = kOk;
        if (inv.command == "simulate") {
            cmd_simulate(*cfg, seed, ctx);
        } else if (inv.command == "riccati") {
            cmd_riccati(*cfg, ctx);
        } else if (inv.command == "pointwise") {
            cmd_pointwise(*cfg, ctx);
        } else if (inv.command == "figure1") {
            cmd_figure1(cfg, ctx);
        } else if (inv.command == "lsmc") {
            cmd_lsmc(*cfg, seed, ctx);
        } else if (inv.command == "martingale") {
            cmd_martingale(*cfg, seed, ctx);
        } else if (inv.command == "verify") {
            code = cmd_verify(*cfg, seed, ctx);
        } else {
            throw ConfigError("unknown subcommand '" + inv.command + "'");
        }
        ctx.manifest["status"] = code == kOk ? "ok" : "verify_failed";
        return finish(code);
    } catch (const ConfigError& e) {
        ctx.manifest["error"] = e.what();
        return finish(kConfigError);
    } catch (const NumericError& e) {
        ctx.manifest["error"] = e.what();
        return finish(kNumericError);
    } catch (const std::exception& e) {
        ctx.manifest["error"] = e.what();
        return finish(kNumericError);
    }
}

}  // namespace delayfolio::cli
