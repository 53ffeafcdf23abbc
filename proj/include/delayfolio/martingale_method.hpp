#pragma once

#include <vector>

#include "delayfolio/delay_sde.hpp"
#include "delayfolio/regression.hpp"

namespace delayfolio {

// State-price density paths H0(t) = exp(-int theta dW - 1/2 int |theta|^2 - int r),
// step-major layout like PathBundle. Requires a complete market (m = N).
std::vector<double> simulate_H0(const PathBundle& bundle, const CoefficientSet& coeffs,
                                int workers = 0);

struct PhiZx {
    double phi = 0.0;
    double phi_se = 0.0;
    double Zx = 0.0;  // (x / phi)^(gamma - 1)
};
PhiZx compute_phi_Zx(const std::vector<double>& H_terminal, const PowerUtility& utility);

// Lambda(z) = E[H0(T) I(z H0(T))], the dual budget function.
double estimate_Lambda(const std::vector<double>& H_terminal, const PowerUtility& utility,
                       double z);

// Regression representation of the dual martingale M(t) and its integrand.
struct MartingaleSolution {
    TimeGrid grid;
    int n_paths = 0;
    int N = 1;
    PhiZx phiZx;
    double M0 = 0.0;
    double M0_se = 0.0;
    PolyBasis basis;  // over (y..., v, z..., log H0)
    std::vector<VectorXd> means, scales;  // per step
    std::vector<VectorXd> coef_M;         // per step
    std::vector<MatrixXd> coef_psi;       // per step, N x n_terms
    std::vector<double> M;    // (K+1) * n_paths fitted values (step K holds the payoff)
    std::vector<double> psi;  // K * N * n_paths fitted values

    double m_at(int k, std::size_t p) const { return M[static_cast<std::size_t>(k) * n_paths + p]; }
    double psi_at(int k, int c, std::size_t p) const {
        return psi[(static_cast<std::size_t>(k) * N + c) * n_paths + p];
    }
};

MartingaleSolution estimate_M_and_psi(const PathBundle& bundle, const std::vector<double>& H,
                                      const PowerUtility& utility, const BasisSpec& basis,
                                      int workers = 0);

// pi = (sigma^T)^{-1} (theta + psi / M) at the state of path p, step k.
VectorXd pi_from_martingale(const MartingaleSolution& sol, const PathBundle& bundle,
                            const CoefficientSet& coeffs, int k, std::size_t p);

struct Theorem41Report {
    double eq20_q50 = 0.0, eq20_q95 = 0.0;  // rel. error of M = H0 X
    double eq21_q50 = 0.0, eq21_q95 = 0.0;  // rel. error of p = Zx H0^g M^(1-g)
    double pT_mean = 0.0;
    double pT_se = 0.0;       // includes the phi-estimation uncertainty
    int times_checked = 0;
};

// wealth: paths of X under the candidate optimal strategy; phat_paths: the
// BSDE-side log-dual along the same paths, layout (K+1) x n_paths.
Theorem41Report check_theorem41(const MartingaleSolution& sol, const PathBundle& bundle,
                                const std::vector<double>& H, const WealthPaths& wealth,
                                const std::vector<double>& phat_paths,
                                const PowerUtility& utility, int time_stride = 10);

}  // namespace delayfolio
