#include "delayfolio/closed_form.hpp"

#include <cmath>

#include "delayfolio/parallel.hpp"
#include "delayfolio/rng.hpp"

namespace delayfolio {

namespace {

// right-hand sides of the backward psi system
struct PsiRhs {
    double a1, a2, b1, b2, lam, c;  // c = sigma_F^2 / (1 - gamma)
    double sF2;

    std::array<double, 4> operator()(const std::array<double, 4>& p) const {
        return {
            -2.0 * a1 * p[0] - c * p[0] * p[0] - 2.0 * p[2] - 2.0 * b1,
            2.0 * lam * p[1] - 2.0 * a2 * p[2] - c * p[2] * p[2] - 2.0 * b2,
            (lam - a1) * p[2] - c * p[0] * p[2] - a2 * p[0] - p[1],
            -0.5 * sF2 * p[0],
        };
    }
};

std::array<double, 4> axpy(const std::array<double, 4>& p, double h,
                           const std::array<double, 4>& d) {
    return {p[0] + h * d[0], p[1] + h * d[1], p[2] + h * d[2], p[3] + h * d[3]};
}

double max_abs(const std::array<double, 4>& p) {
    double m = 0.0;
    for (double x : p) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

double RiccatiSolution::value(int i, double t) const {
    if (t < -1e-12 || t > T + 1e-12) throw Error("riccati: t out of range");
    const double u = std::clamp(t / T * K, 0.0, static_cast<double>(K));
    const int k = std::min(static_cast<int>(u), K - 1);
    const double w = u - k;
    return (1.0 - w) * psi[i][k] + w * psi[i][k + 1];
}

RiccatiSolution solve_riccati(const LqParams& params, const RiccatiOptions& opts) {
    if (!(params.beta1 < 0.0))
        throw ConfigError("riccati: requires beta1 < 0");
    if (!(params.T > 0.0) || opts.steps < 1) throw ConfigError("riccati: bad grid");
    const PsiRhs rhs{params.alpha1, params.alpha2,  params.beta1, params.beta2,
                     params.lambda, params.sigma_F * params.sigma_F / (1.0 - params.gamma),
                     params.sigma_F * params.sigma_F};
    const int K = opts.steps;
    const double h = -params.T / K;  // backward

    RiccatiSolution sol;
    sol.T = params.T;
    sol.K = K;
    for (auto& v : sol.psi) v.assign(K + 1, 0.0);

    std::array<double, 4> p{0.0, 0.0, 0.0, 0.0};
    for (int i = K; i-- > 0;) {
        const auto k1 = rhs(p);
        const auto k2 = rhs(axpy(p, h / 2.0, k1));
        const auto k3 = rhs(axpy(p, h / 2.0, k2));
        const auto k4 = rhs(axpy(p, h, k3));
        for (int j = 0; j < 4; ++j)
            p[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        if (!(max_abs(p) < opts.blow_up_threshold) || !std::isfinite(max_abs(p))) {
            // bisect between the last good node and this one for the blow-up time
            double lo = sol.T * i / K, hi = sol.T * (i + 1) / K;
            for (int it = 0; it < 40; ++it) {
                const double mid = 0.5 * (lo + hi);
                // probe: integrate from hi (known values at i+1) down to mid
                std::array<double, 4> q{sol.psi[0][i + 1], sol.psi[1][i + 1], sol.psi[2][i + 1],
                                        sol.psi[3][i + 1]};
                const double hh = (mid - hi) / 16.0;
                bool blew = false;
                for (int s = 0; s < 16; ++s) {
                    const auto m1 = rhs(q);
                    const auto m2 = rhs(axpy(q, hh / 2.0, m1));
                    const auto m3 = rhs(axpy(q, hh / 2.0, m2));
                    const auto m4 = rhs(axpy(q, hh, m3));
                    for (int j = 0; j < 4; ++j)
                        q[j] += hh / 6.0 * (m1[j] + 2.0 * m2[j] + 2.0 * m3[j] + m4[j]);
                    if (!(max_abs(q) < opts.blow_up_threshold)) {
                        blew = true;
                        break;
                    }
                }
                (blew ? lo : hi) = mid;
            }
            const double t_blow = 0.5 * (lo + hi);
            throw BlowUpError("riccati: solution blow-up near t = " + std::to_string(t_blow), t_blow);
        }
        for (int j = 0; j < 4; ++j) sol.psi[j][i] = p[j];
    }
    return sol;
}

EtaValue eta_lq(const RiccatiSolution& sol, double t, double y, double v) {
    EtaValue e;
    const double p1 = sol.value(0, t);
    const double p2 = sol.value(1, t);
    const double p3 = sol.value(2, t);
    const double p4 = sol.value(3, t);
    e.eta = 0.5 * p1 * y * y + 0.5 * p2 * v * v + p3 * y * v + p4;
    e.deta_dy = p1 * y + p3 * v;
    return e;
}

StrategyTerms optimal_pi_infinite(const RiccatiSolution& sol, const CoefficientSet& coeffs,
                                  const PowerUtility& utility, double t, double y, double v) {
    if (coeffs.dims.m != 1 || coeffs.dims.n != 1 || coeffs.dims.N != 1)
        throw ConfigError("optimal_pi_infinite: requires m = n = N = 1");
    FactorState s;
    s.y = VectorXd::Constant(1, y);
    s.v = v;
    s.z = s.y;
    const double sigma = coeffs.sigma(s)(0, 0);
    if (sigma == 0.0) throw SingularMatrixError("optimal_pi_infinite: sigma = 0");
    const double one_m_g = 1.0 - utility.gamma;
    const double sF = coeffs.sigma_F(s.y, s.v)(0, 0);
    const EtaValue e = eta_lq(sol, t, y, v);
    StrategyTerms terms;
    terms.merton = VectorXd::Constant(1, (coeffs.mu(s)(0) - coeffs.r(s)) / (one_m_g * sigma * sigma));
    terms.hedging = VectorXd::Constant(1, sF * e.deta_dy / (one_m_g * sigma));
    return terms;
}

FeynmanKacResult feynman_kac_eta(const CoefficientSet& coeffs, const PowerUtility& utility,
                                 const DelaySpec& delay, double T, double y, double v,
                                 const FeynmanKacOptions& opts) {
    utility.validate();
    if (coeffs.dims.n != 1 || coeffs.dims.N != 1)
        throw ConfigError("feynman_kac_eta: requires n = N = 1");
    if (opts.n_paths < 2 || opts.steps < 1) throw ConfigError("feynman_kac_eta: bad options");
    if (opts.antithetic && opts.n_paths % 2 != 0)
        throw ConfigError("feynman_kac_eta: antithetic requires an even path count");
    const double gt = utility.gamma_tilde();
    const double gam = utility.gamma;
    const double dt = T / opts.steps;
    const double sdt = std::sqrt(dt);
    const std::size_t np = static_cast<std::size_t>(opts.n_paths);
    const std::size_t half = opts.antithetic ? np / 2 : np;

    auto integrand = [&](double yy, double vv) {
        FactorState s;
        s.y = VectorXd::Constant(1, yy);
        s.v = vv;
        s.z = s.y;  // no-Z form: evaluators must not depend on z
        const double th = eval_theta(coeffs, s)(0);
        return gt * coeffs.r(s) + 0.5 * gt / (1.0 - gam) * th * th;
    };
    auto tilted_drift = [&](double yy, double vv) {
        FactorState s;
        s.y = VectorXd::Constant(1, yy);
        s.v = vv;
        s.z = s.y;
        const double th = eval_theta(coeffs, s)(0);
        return coeffs.b(s.y, s.v)(0) + gt * th * coeffs.sigma_F(s.y, s.v)(0, 0);
    };

    std::vector<double> expo(np);
    parallel_for(np, opts.workers, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) {
            const bool mirror = opts.antithetic && p >= half;
            PathRng rng(opts.seed, mirror ? p - half : p);
            const double sign = mirror ? -1.0 : 1.0;
            double yy = y, vv = v;
            double acc = 0.0;
            double g_prev = integrand(yy, vv);
            VectorXd yv = VectorXd::Constant(1, yy);
            for (int k = 0; k < opts.steps; ++k) {
                const double dw = sign * rng.next_normal() * sdt;
                yv(0) = yy;
                const double sF = coeffs.sigma_F(yv, vv)(0, 0);
                const double ynext = yy + tilted_drift(yy, vv) * dt + sF * dw;
                const double vnext = vv + (coeffs.h(yv) - delay.lambda * vv) * dt;
                const double g_next = integrand(ynext, vnext);
                acc += 0.5 * (g_prev + g_next) * dt;
                yy = ynext;
                vv = vnext;
                g_prev = g_next;
            }
            expo[p] = acc;
        }
    });

    double max_expo = -std::numeric_limits<double>::infinity();
    for (double e : expo) max_expo = std::max(max_expo, e);
    if (max_expo > 700.0)
        throw OverflowError("feynman_kac_eta: exponent overflow (max " + std::to_string(max_expo) + ")",
                            max_expo);
    double sum = 0.0, sumsq = 0.0;
    for (double e : expo) {
        const double w = std::exp(e);
        sum += w;
        sumsq += w * w;
    }
    const double mean = sum / static_cast<double>(np);
    const double var = std::max(0.0, sumsq / static_cast<double>(np) - mean * mean);
    const double se = std::sqrt(var / static_cast<double>(np - 1));
    FeynmanKacResult r;
    r.eta = (1.0 - gam) * std::log(mean);
    r.std_error = (1.0 - gam) * se / mean;
    r.max_exponent = max_expo;
    return r;
}

ConstraintReport check_pointwise_constraints(const LqParams& p) {
    if (p.alpha3 == 0.0) throw ConfigError("pointwise constraints: alpha3 = 0");
    if (std::isinf(p.delta)) throw ConfigError("pointwise constraints: delta must be finite");
    ConstraintReport rep;
    const double eld = std::exp(p.lambda * p.delta);
    const double ratio = p.beta3 / p.alpha3;
    rep.residuals[0] = p.alpha1 + eld * p.alpha3 - 1.0;
    rep.residuals[1] = -p.alpha1 * ratio + p.beta1 - 1.0;
    rep.residuals[2] = p.alpha2 - p.lambda * eld * p.alpha3 - p.alpha3 * eld;
    rep.residuals[3] = -p.alpha2 * ratio + p.beta2 - p.alpha3 * eld;
    rep.pass = true;
    for (double r : rep.residuals)
        if (!(std::abs(r) < 1e-10)) rep.pass = false;
    return rep;
}

double PointwiseSolution::Q(double t) const { return std::exp(params.T - t) - 1.0; }

double PointwiseSolution::psi(double t) const {
    const double c = 1.0 + params.beta3 / params.alpha3;
    const double e = std::exp(params.T - t);
    return params.sigma_F * params.sigma_F / (2.0 * (1.0 - params.gamma)) *
           (0.5 * (e * e - 1.0) + 2.0 * c * (1.0 - e) + c * c * (params.T - t));
}

double PointwiseSolution::phat(double t, double y, double v) const {
    return Q(t) * (y + std::exp(params.lambda * params.delta) * params.alpha3 * v) -
           params.beta3 / params.alpha3 * y + psi(t);
}

double PointwiseSolution::qhat(double t) const {
    return params.sigma_F * (Q(t) - params.beta3 / params.alpha3);
}

PointwiseSolution pointwise_solution(const LqParams& params) {
    const ConstraintReport rep = check_pointwise_constraints(params);
    if (!rep.pass) {
        std::string msg = "pointwise_solution: constraint residuals exceed 1e-10:";
        for (double r : rep.residuals) msg += " " + std::to_string(r);
        throw ConfigError(msg);
    }
    return PointwiseSolution{params};
}

StrategyTerms pointwise_pi(const PointwiseSolution& sol, const CoefficientSet& coeffs,
                           const PowerUtility& utility, double t, const FactorState& state) {
    if (coeffs.dims.m != 1 || coeffs.dims.N != 1)
        throw ConfigError("pointwise_pi: requires m = N = 1");
    const double sigma = coeffs.sigma(state)(0, 0);
    if (sigma == 0.0) throw SingularMatrixError("pointwise_pi: sigma = 0");
    const double one_m_g = 1.0 - utility.gamma;
    StrategyTerms terms;
    terms.merton =
        VectorXd::Constant(1, (coeffs.mu(state)(0) - coeffs.r(state)) / (one_m_g * sigma * sigma));
    terms.hedging = VectorXd::Constant(1, sol.qhat(t) / (one_m_g * sigma));
    return terms;
}

}  // namespace delayfolio
