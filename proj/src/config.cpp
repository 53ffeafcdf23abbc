#include "delayfolio/config.hpp"

#include <map>
#include <set>

namespace delayfolio {

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& ctx) {
    if (!obj.is_object()) throw ConfigError(ctx + ": expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError(ctx + ": unknown key '" + it.key() + "'");
}

double get_num(const json& obj, const std::string& key, const std::string& ctx) {
    if (!obj.contains(key)) throw ConfigError(ctx + ": missing key '" + key + "'");
    if (!obj[key].is_number()) throw ConfigError(ctx + "." + key + ": expected a number");
    return obj[key].get<double>();
}

double get_num_or(const json& obj, const std::string& key, double fallback) {
    if (!obj.contains(key)) return fallback;
    return obj[key].get<double>();
}

int get_int(const json& obj, const std::string& key, const std::string& ctx) {
    if (!obj.contains(key)) throw ConfigError(ctx + ": missing key '" + key + "'");
    if (!obj[key].is_number_integer()) throw ConfigError(ctx + "." + key + ": expected an integer");
    return obj[key].get<int>();
}

std::map<std::string, FamilyFactory>& family_registry() {
    static std::map<std::string, FamilyFactory> reg;
    return reg;
}

VectorXd to_vector(const json& arr, const std::string& ctx) {
    if (!arr.is_array() || arr.empty()) throw ConfigError(ctx + ": expected a nonempty array");
    VectorXd v(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) v(i) = arr[i].get<double>();
    return v;
}

MatrixXd to_matrix(const json& arr, const std::string& ctx) {
    if (!arr.is_array() || arr.empty()) throw ConfigError(ctx + ": expected a nonempty 2-D array");
    const std::size_t rows = arr.size();
    const std::size_t cols = arr[0].size();
    MatrixXd m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (!arr[i].is_array() || arr[i].size() != cols)
            throw ConfigError(ctx + ": ragged 2-D array");
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = arr[i][j].get<double>();
    }
    return m;
}

HKind parse_h_kind(const json& obj, const std::string& ctx) {
    const std::string kind = obj.value("h", "y1");
    if (kind == "zero") return HKind::Zero;
    if (kind == "y1") return HKind::FirstComponent;
    throw ConfigError(ctx + ".h: expected 'zero' or 'y1'");
}

CoefficientSet build_builtin_family(const std::string& family, const json& fp,
                                    const ModelDims& dims, const PowerUtility& utility,
                                    std::optional<LqParams>& lq, const DelaySpec& delay,
                                    double horizon) {
    const std::string ctx = "model.coefficients";
    if (family == "constant") {
        check_keys(fp, {"family", "r", "mu", "sigma", "b", "sigma_F", "h"}, ctx);
        ConstantFamilyParams p;
        p.dims = dims;
        p.r0 = get_num(fp, "r", ctx);
        p.mu0 = to_vector(fp.at("mu"), ctx + ".mu");
        p.sigma0 = to_matrix(fp.at("sigma"), ctx + ".sigma");
        p.b0 = fp.contains("b") ? to_vector(fp.at("b"), ctx + ".b") : VectorXd::Zero(dims.n);
        p.sigmaF0 = fp.contains("sigma_F") ? to_matrix(fp.at("sigma_F"), ctx + ".sigma_F")
                                           : MatrixXd::Zero(dims.n, dims.N);
        p.h_kind = parse_h_kind(fp, ctx);
        return make_constant_family(p);
    }
    if (family == "affine") {
        check_keys(fp,
                   {"family", "r0", "r_y", "r_v", "r_z", "mu0", "mu_y", "mu_v", "mu_z", "sigma0",
                    "sigma_y", "sigma_v", "sigma_z", "b0", "b_y", "b_v", "sigma_F", "h"},
                   ctx);
        if (dims.m != 1 || dims.n != 1 || dims.N != 1)
            throw ConfigError(ctx + ": affine family requires m = n = N = 1");
        AffineFamilyParams p;
        p.r0 = get_num_or(fp, "r0", 0.0);
        p.r_y = get_num_or(fp, "r_y", 0.0);
        p.r_v = get_num_or(fp, "r_v", 0.0);
        p.r_z = get_num_or(fp, "r_z", 0.0);
        p.mu0 = get_num_or(fp, "mu0", 0.0);
        p.mu_y = get_num_or(fp, "mu_y", 0.0);
        p.mu_v = get_num_or(fp, "mu_v", 0.0);
        p.mu_z = get_num_or(fp, "mu_z", 0.0);
        p.sigma0 = get_num_or(fp, "sigma0", 0.2);
        p.sigma_y = get_num_or(fp, "sigma_y", 0.0);
        p.sigma_v = get_num_or(fp, "sigma_v", 0.0);
        p.sigma_z = get_num_or(fp, "sigma_z", 0.0);
        p.b0 = get_num_or(fp, "b0", 0.0);
        p.b_y = get_num_or(fp, "b_y", 0.0);
        p.b_v = get_num_or(fp, "b_v", 0.0);
        p.sigmaF0 = get_num_or(fp, "sigma_F", 0.0);
        p.h_kind = parse_h_kind(fp, ctx);
        return make_affine_family(p);
    }
    if (family == "lq_pointwise") {
        check_keys(fp, {"family", "alpha", "beta", "sigma", "sigma_F"}, ctx);
        if (dims.m != 1 || dims.n != 1 || dims.N != 1)
            throw ConfigError(ctx + ": lq_pointwise requires m = n = N = 1");
        const VectorXd alpha = to_vector(fp.at("alpha"), ctx + ".alpha");
        const VectorXd beta = to_vector(fp.at("beta"), ctx + ".beta");
        if (alpha.size() != 3 || beta.size() != 3)
            throw ConfigError(ctx + ": alpha and beta must have three entries");
        LqPointwiseParams p;
        p.alpha1 = alpha(0);
        p.alpha2 = alpha(1);
        p.alpha3 = alpha(2);
        p.beta1 = beta(0);
        p.beta2 = beta(1);
        p.beta3 = beta(2);
        p.sigma0 = get_num(fp, "sigma", ctx);
        p.sigma_F = get_num(fp, "sigma_F", ctx);
        LqParams q;
        q.alpha1 = p.alpha1;
        q.alpha2 = p.alpha2;
        q.alpha3 = p.alpha3;
        q.beta1 = p.beta1;
        q.beta2 = p.beta2;
        q.beta3 = p.beta3;
        q.sigma_F = p.sigma_F;
        q.lambda = delay.lambda;
        q.delta = delay.delta;
        q.gamma = utility.gamma;
        q.T = horizon;
        lq = q;
        return make_lq_pointwise_family(p, utility);
    }
    if (family == "lq_infinite") {
        check_keys(fp, {"family", "alpha", "beta", "theta0", "sigma", "sigma_F"}, ctx);
        if (dims.m != 1 || dims.n != 1 || dims.N != 1)
            throw ConfigError(ctx + ": lq_infinite requires m = n = N = 1");
        const VectorXd alpha = to_vector(fp.at("alpha"), ctx + ".alpha");
        const VectorXd beta = to_vector(fp.at("beta"), ctx + ".beta");
        if (alpha.size() != 2 || beta.size() != 2)
            throw ConfigError(ctx + ": alpha and beta must have two entries");
        LqInfiniteParams p;
        p.alpha1 = alpha(0);
        p.alpha2 = alpha(1);
        p.beta1 = beta(0);
        p.beta2 = beta(1);
        p.theta0 = get_num_or(fp, "theta0", 0.0);
        p.sigma0 = get_num(fp, "sigma", ctx);
        p.sigma_F = get_num(fp, "sigma_F", ctx);
        LqParams q;
        q.alpha1 = p.alpha1;
        q.alpha2 = p.alpha2;
        q.alpha3 = 0.0;
        q.beta1 = p.beta1;
        q.beta2 = p.beta2;
        q.beta3 = 0.0;
        q.sigma_F = p.sigma_F;
        q.lambda = delay.lambda;
        q.delta = delay.delta;
        q.gamma = utility.gamma;
        q.T = horizon;
        lq = q;
        return make_lq_infinite_family(p, utility);
    }
    const auto it = family_registry().find(family);
    if (it != family_registry().end()) return it->second(fp, utility);
    throw ConfigError(ctx + ": unknown family '" + family + "'");
}

}  // namespace

void register_family(const std::string& name, FamilyFactory factory) {
    static const std::set<std::string> builtin{"constant", "affine", "lq_pointwise", "lq_infinite"};
    if (builtin.count(name)) throw ConfigError("register_family: cannot override builtin '" + name + "'");
    family_registry()[name] = std::move(factory);
}

RunConfig parse_config(const json& root) {
    check_keys(root, {"model", "numerics", "simulate", "verify"}, "config");
    if (!root.contains("model")) throw ConfigError("config: missing 'model' section");
    if (!root.contains("numerics")) throw ConfigError("config: missing 'numerics' section");

    RunConfig cfg;
    const json& model = root.at("model");
    check_keys(model, {"dims", "initial_factor", "utility", "delay", "coefficients"}, "model");

    {
        const json& dims = model.at("dims");
        check_keys(dims, {"assets", "factors", "noise"}, "model.dims");
        cfg.dims.m = get_int(dims, "assets", "model.dims");
        cfg.dims.n = get_int(dims, "factors", "model.dims");
        cfg.dims.N = get_int(dims, "noise", "model.dims");
        cfg.dims.validate();
    }
    cfg.y0 = to_vector(model.at("initial_factor"), "model.initial_factor");
    if (cfg.y0.size() != cfg.dims.n)
        throw ConfigError("model.initial_factor: wrong dimension");
    {
        const json& u = model.at("utility");
        check_keys(u, {"gamma", "initial_wealth"}, "model.utility");
        cfg.utility.gamma = get_num(u, "gamma", "model.utility");
        cfg.utility.initial_wealth = get_num_or(u, "initial_wealth", 1.0);
        cfg.utility.validate();
    }
    {
        const json& d = model.at("delay");
        check_keys(d, {"lambda", "delta", "history"}, "model.delay");
        cfg.delay.lambda = get_num(d, "lambda", "model.delay");
        if (d.at("delta").is_string()) {
            if (d.at("delta").get<std::string>() != "inf")
                throw ConfigError("model.delay.delta: expected a number or 'inf'");
            cfg.delay.delta = std::numeric_limits<double>::infinity();
        } else {
            cfg.delay.delta = get_num(d, "delta", "model.delay");
        }
        if (d.contains("history")) {
            const json& h = d.at("history");
            check_keys(h, {"type", "times", "values"}, "model.delay.history");
            const std::string type = h.value("type", "constant");
            if (type == "constant") {
                cfg.delay.history = History::constant(cfg.y0);
            } else if (type == "grid") {
                std::vector<double> times;
                std::vector<VectorXd> values;
                for (const auto& t : h.at("times")) times.push_back(t.get<double>());
                for (const auto& v : h.at("values"))
                    values.push_back(to_vector(v, "model.delay.history.values"));
                cfg.delay.history = History::grid(std::move(times), std::move(values));
            } else {
                throw ConfigError("model.delay.history.type: expected 'constant' or 'grid'");
            }
        } else {
            cfg.delay.history = History::constant(cfg.y0);
        }
    }

    const json& numerics = root.at("numerics");
    check_keys(numerics,
               {"horizon", "steps", "paths", "basis_degree", "cross_terms", "picard_sweeps",
                "clip_bound", "seed", "workers", "antithetic", "dump_paths"},
               "numerics");
    cfg.horizon = get_num(numerics, "horizon", "numerics");
    cfg.steps = get_int(numerics, "steps", "numerics");
    cfg.paths = get_int(numerics, "paths", "numerics");
    cfg.basis.degree = numerics.value("basis_degree", 2);
    cfg.basis.cross_terms = numerics.value("cross_terms", true);
    cfg.basis.validate();
    cfg.picard_sweeps = numerics.value("picard_sweeps", 2);
    cfg.clip_bound = numerics.value("clip_bound", 50.0);
    if (numerics.contains("seed")) cfg.seed = numerics.at("seed").get<std::uint64_t>();
    cfg.workers = numerics.value("workers", 0);
    cfg.antithetic = numerics.value("antithetic", false);
    cfg.dump_paths = numerics.value("dump_paths", 100);
    if (cfg.paths < 1) throw ConfigError("numerics.paths: need at least one path");

    // grid validity, including the delay-lag snap
    const TimeGrid grid = cfg.grid();
    if (!cfg.delay.infinite()) (void)grid.lag_steps(cfg.delay.delta);

    {
        const json& c = model.at("coefficients");
        if (!c.contains("family")) throw ConfigError("model.coefficients: missing 'family'");
        cfg.family = c.at("family").get<std::string>();
        cfg.coeffs = build_builtin_family(cfg.family, c, cfg.dims, cfg.utility, cfg.lq, cfg.delay,
                                          cfg.horizon);
        if (cfg.family == "lq_infinite" && !cfg.delay.infinite())
            throw ConfigError("lq_infinite family requires delta = 'inf'");
        if (cfg.family == "lq_pointwise" && cfg.delay.infinite())
            throw ConfigError("lq_pointwise family requires a finite delta");
    }
    cfg.delay.validate(cfg.y0);

    if (root.contains("simulate")) {
        const json& s = root.at("simulate");
        check_keys(s, {"strategy"}, "simulate");
        if (s.contains("strategy")) {
            const json& st = s.at("strategy");
            check_keys(st, {"kind", "values"}, "simulate.strategy");
            cfg.strategy.kind = st.value("kind", "zero");
            if (cfg.strategy.kind == "constant")
                cfg.strategy.values = to_vector(st.at("values"), "simulate.strategy.values");
            else if (st.contains("values"))
                throw ConfigError("simulate.strategy.values: only valid for kind 'constant'");
            static const std::set<std::string> kinds{"zero", "constant", "merton", "closed_form"};
            if (!kinds.count(cfg.strategy.kind))
                throw ConfigError("simulate.strategy.kind: unknown kind '" + cfg.strategy.kind + "'");
        }
    }
    if (root.contains("verify")) {
        const json& v = root.at("verify");
        check_keys(v, {"n_times", "perturbations", "threshold"}, "verify");
        cfg.verify.n_times = v.value("n_times", 5);
        cfg.verify.threshold = v.value("threshold", 3.0);
        if (v.contains("perturbations")) {
            cfg.verify.perturbations.clear();
            for (const auto& e : v.at("perturbations"))
                cfg.verify.perturbations.push_back(e.get<double>());
        }
    }

    cfg.canonical = root;
    return cfg;
}

std::string config_hash(const json& canonical) {
    const std::string s = canonical.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace delayfolio
