#include "delayfolio/martingale_method.hpp"

#include <algorithm>
#include <cmath>

#include "delayfolio/parallel.hpp"

namespace delayfolio {

std::vector<double> simulate_H0(const PathBundle& bundle, const CoefficientSet& coeffs,
                                int workers) {
    if (coeffs.dims.m != coeffs.dims.N)
        throw ConfigError("simulate_H0: martingale method requires a complete market (m = N)");
    const int K = bundle.grid.K;
    const std::size_t np = static_cast<std::size_t>(bundle.n_paths);
    const double dt = bundle.grid.dt();
    std::vector<double> H(static_cast<std::size_t>(K + 1) * np);
    parallel_for(np, workers, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) {
            double logh = 0.0;
            H[p] = 1.0;
            for (int k = 0; k < K; ++k) {
                const FactorState s = bundle.state(k, p);
                const VectorXd theta = eval_theta(coeffs, s);
                double dw_term = 0.0;
                for (int c = 0; c < bundle.N; ++c) dw_term += theta(c) * bundle.dw(k, c, p);
                logh += -dw_term - (0.5 * theta.squaredNorm() + coeffs.r(s)) * dt;
                const double h = std::exp(logh);
                if (!std::isfinite(h))
                    throw NonFiniteError("simulate_H0: non-finite density at step " +
                                         std::to_string(k + 1));
                H[static_cast<std::size_t>(k + 1) * np + p] = h;
            }
        }
    });
    return H;
}

PhiZx compute_phi_Zx(const std::vector<double>& H_terminal, const PowerUtility& utility) {
    utility.validate();
    if (H_terminal.size() < 2) throw ConfigError("compute_phi_Zx: need terminal samples");
    const double gt = utility.gamma_tilde();
    double sum = 0.0, sumsq = 0.0;
    for (double h : H_terminal) {
        const double w = std::pow(h, -gt);
        sum += w;
        sumsq += w * w;
    }
    const double n = static_cast<double>(H_terminal.size());
    PhiZx out;
    out.phi = sum / n;
    out.phi_se = std::sqrt(std::max(0.0, sumsq / n - out.phi * out.phi) / (n - 1.0));
    out.Zx = std::pow(utility.initial_wealth / out.phi, utility.gamma - 1.0);
    return out;
}

double estimate_Lambda(const std::vector<double>& H_terminal, const PowerUtility& utility,
                       double z) {
    if (!(z > 0.0)) throw ConfigError("estimate_Lambda: z must be positive");
    double sum = 0.0;
    for (double h : H_terminal) sum += h * utility.I(z * h);
    return sum / static_cast<double>(H_terminal.size());
}

MartingaleSolution estimate_M_and_psi(const PathBundle& bundle, const std::vector<double>& H,
                                      const PowerUtility& utility, const BasisSpec& basis_spec,
                                      int workers) {
    utility.validate();
    const int K = bundle.grid.K;
    const int n = bundle.n;
    const int N = bundle.N;
    const std::size_t np = static_cast<std::size_t>(bundle.n_paths);
    const double dt = bundle.grid.dt();
    const double gt = utility.gamma_tilde();

    MartingaleSolution sol;
    sol.grid = bundle.grid;
    sol.n_paths = bundle.n_paths;
    sol.N = N;

    // terminal payoff (x/phi) H0(T)^{-gt}
    std::vector<double> target(np);
    {
        std::vector<double> hT(H.begin() + static_cast<std::ptrdiff_t>(K) * bundle.n_paths,
                               H.begin() + static_cast<std::ptrdiff_t>(K + 1) * bundle.n_paths);
        sol.phiZx = compute_phi_Zx(hT, utility);
        const double scale = utility.initial_wealth / sol.phiZx.phi;
        for (std::size_t p = 0; p < np; ++p) target[p] = scale * std::pow(hT[p], -gt);
    }

    const int n_vars = 2 * n + 2;  // y comps, v, z comps, log H0
    sol.basis = PolyBasis::make(n_vars, basis_spec);
    if (sol.basis.n_terms() >= bundle.n_paths / 10)
        throw ConfigError("martingale: basis has too many terms for the path count");
    sol.means.assign(K + 1, VectorXd());
    sol.scales.assign(K + 1, VectorXd());
    sol.coef_M.assign(K + 1, VectorXd::Zero(sol.basis.n_terms()));
    sol.coef_psi.assign(K, MatrixXd::Zero(N, sol.basis.n_terms()));
    sol.M.resize(static_cast<std::size_t>(K + 1) * np);
    sol.psi.resize(static_cast<std::size_t>(K) * N * np);

    std::vector<double> logH(np);
    std::vector<double> incr(np);

    // M(T) is the payoff itself
    std::copy(target.begin(), target.end(), sol.M.begin() + static_cast<std::ptrdiff_t>(K) * bundle.n_paths);

    auto build_step = [&](int k, StepRegression& reg) {
        for (int j = 0; j < n; ++j) reg.set_var(j, &bundle.Y[(static_cast<std::size_t>(k) * n + j) * np]);
        reg.set_var(n, &bundle.V[static_cast<std::size_t>(k) * np]);
        for (int j = 0; j < n; ++j)
            reg.set_var(n + 1 + j, &bundle.Z[(static_cast<std::size_t>(k) * n + j) * np]);
        const double* hrow = &H[static_cast<std::size_t>(k) * np];
        parallel_for(np, workers, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t p = lo; p < hi; ++p) logH[p] = std::log(hrow[p]);
        });
        reg.set_var(n_vars - 1, logH.data());
        reg.build(workers);
    };

    // pass 1: conditional expectations M_k
    for (int k = 0; k < K; ++k) {
        StepRegression reg(sol.basis, np, k);
        build_step(k, reg);
        const VectorXd cm = reg.fit(target.data());
        reg.predict(cm, &sol.M[static_cast<std::size_t>(k) * np], workers);
        sol.coef_M[k] = cm;
        sol.means[k] = reg.means();
        sol.scales[k] = reg.scales();
    }

    // pass 2: representation integrand psi_k from the fitted M increments
    for (int k = 0; k < K; ++k) {
        StepRegression reg(sol.basis, np, k);
        build_step(k, reg);
        const double* Mk = &sol.M[static_cast<std::size_t>(k) * np];
        const double* Mk1 = &sol.M[static_cast<std::size_t>(k + 1) * np];
        for (int c = 0; c < N; ++c) {
            const double* dw = &bundle.dW[(static_cast<std::size_t>(k) * N + c) * np];
            parallel_for(np, workers, [&](std::size_t lo, std::size_t hi) {
                for (std::size_t p = lo; p < hi; ++p) incr[p] = (Mk1[p] - Mk[p]) * dw[p] / dt;
            });
            const VectorXd cpsi = reg.fit(incr.data());
            sol.coef_psi[k].row(c) = cpsi.transpose();
            reg.predict(cpsi, &sol.psi[(static_cast<std::size_t>(k) * N + c) * np], workers);
        }
    }

    // M(0) is the cross-path mean (deterministic state at t = 0)
    double acc = 0.0, accsq = 0.0;
    for (std::size_t p = 0; p < np; ++p) {
        acc += target[p];
        accsq += target[p] * target[p];
    }
    sol.M0 = acc / static_cast<double>(np);
    sol.M0_se = std::sqrt(std::max(0.0, accsq / static_cast<double>(np) - sol.M0 * sol.M0) /
                          static_cast<double>(np - 1));
    return sol;
}

VectorXd pi_from_martingale(const MartingaleSolution& sol, const PathBundle& bundle,
                            const CoefficientSet& coeffs, int k, std::size_t p) {
    if (coeffs.dims.m != coeffs.dims.N)
        throw ConfigError("pi_from_martingale: requires a complete market (m = N)");
    const double m_val = sol.m_at(k, p);
    if (!(m_val > 0.0))
        throw NumericError("pi_from_martingale: nonpositive M estimate at step " +
                           std::to_string(k) + ", path " + std::to_string(p));
    const FactorState s = bundle.state(k, p);
    const VectorXd theta = eval_theta(coeffs, s);
    VectorXd rhs(bundle.N);
    for (int c = 0; c < bundle.N; ++c) rhs(c) = theta(c) + sol.psi_at(k, c, p) / m_val;
    const MatrixXd sigma = coeffs.sigma(s);
    if (bundle.N == 1) {
        if (sigma(0, 0) == 0.0) throw SingularMatrixError("pi_from_martingale: sigma = 0");
        return VectorXd::Constant(1, rhs(0) / sigma(0, 0));
    }
    return sigma.transpose().partialPivLu().solve(rhs);
}

namespace {
double quantile(std::vector<double>& v, double q) {
    if (v.empty()) return 0.0;
    const std::size_t idx = static_cast<std::size_t>(q * (v.size() - 1));
    std::nth_element(v.begin(), v.begin() + idx, v.end());
    return v[idx];
}
}  // namespace

Theorem41Report check_theorem41(const MartingaleSolution& sol, const PathBundle& bundle,
                                const std::vector<double>& H, const WealthPaths& wealth,
                                const std::vector<double>& phat_paths,
                                const PowerUtility& utility, int time_stride) {
    const int K = bundle.grid.K;
    const std::size_t np = static_cast<std::size_t>(bundle.n_paths);
    const double gam = utility.gamma;
    const double Zx = sol.phiZx.Zx;

    std::vector<double> e20, e21;
    e20.reserve(np * (K / time_stride + 1));
    e21.reserve(np * (K / time_stride + 1));
    int times = 0;
    for (int k = time_stride; k <= K; k += time_stride) {
        ++times;
        for (std::size_t p = 0; p < np; ++p) {
            const double hx = H[static_cast<std::size_t>(k) * np + p] * wealth.x(k, p);
            e20.push_back(std::abs(sol.m_at(k, p) - hx) / std::abs(hx));
            const double p_bsde = std::exp(phat_paths[static_cast<std::size_t>(k) * np + p]);
            const double p_mart =
                Zx * std::pow(H[static_cast<std::size_t>(k) * np + p], gam) * std::pow(hx, 1.0 - gam);
            e21.push_back(std::abs(p_mart - p_bsde) / p_bsde);
        }
    }

    Theorem41Report rep;
    rep.times_checked = times;
    rep.eq20_q50 = quantile(e20, 0.5);
    rep.eq20_q95 = quantile(e20, 0.95);
    rep.eq21_q50 = quantile(e21, 0.5);
    rep.eq21_q95 = quantile(e21, 0.95);

    double acc = 0.0, accsq = 0.0;
    for (std::size_t p = 0; p < np; ++p) {
        const double hx = H[static_cast<std::size_t>(K) * np + p] * wealth.x(K, p);
        const double pT = Zx * std::pow(H[static_cast<std::size_t>(K) * np + p], gam) *
                          std::pow(hx, 1.0 - gam);
        acc += pT;
        accsq += pT * pT;
    }
    rep.pT_mean = acc / static_cast<double>(np);
    const double se_mean = std::sqrt(
        std::max(0.0, accsq / static_cast<double>(np) - rep.pT_mean * rep.pT_mean) /
        static_cast<double>(np - 1));
    // Zx carries the MC error of phi: d log Zx / d log phi = 1 - gamma
    const double se_phi_part =
        (1.0 - gam) * sol.phiZx.phi_se / sol.phiZx.phi * std::abs(rep.pT_mean);
    rep.pT_se = std::sqrt(se_mean * se_mean + se_phi_part * se_phi_part);
    return rep;
}

}  // namespace delayfolio
