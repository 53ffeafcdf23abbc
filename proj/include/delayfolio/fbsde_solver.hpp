#pragma once

#include <functional>
#include <vector>

#include "delayfolio/delay_sde.hpp"
#include "delayfolio/regression.hpp"

namespace delayfolio {

// Quadratic driver of the log-transformed adjoint BSDE:
//   f(state, qhat) = gamma r + (gt/2)|theta|^2
//                  + (1/2) qhat^T (I + gt * proj) qhat + gt theta^T qhat
// with gt = gamma/(1-gamma) and proj the row-space projection of sigma.
double driver_f(const CoefficientSet& coeffs, const PowerUtility& utility,
                const FactorState& state, const VectorXd& qhat);

// Adapted control field: values of qhat at (step k, path p, state). The path
// index lets per-path representations (regression output) plug in directly.
using QhatField = std::function<VectorXd(int k, std::size_t p, const FactorState&)>;

struct LsmcOptions {
    BasisSpec basis;
    int picard_sweeps = 2;
    double clip_bound = 50.0;
    int workers = 0;
};

// Backward least-squares regression solution of the BSDE on the grid of a
// simulated path bundle.
struct BsdeGridSolution {
    TimeGrid grid;
    int n_state_vars = 0;  // y components + v (+ z components when delta finite)
    PolyBasis basis;
    // per step: standardization and coefficients
    std::vector<VectorXd> means;    // K+1, raw-var means
    std::vector<VectorXd> scales;   // K+1 (0 marks dropped var)
    std::vector<VectorXd> coef_p;   // K+1
    std::vector<MatrixXd> coef_q;   // K+1, N x n_terms
    bool include_z = true;
    double p_hat_0 = 0.0;
    long clip_count = 0;
    std::vector<double> picard_deltas;

    VectorXd raw_vars(const FactorState& s) const;
    double phat_at(int k, const FactorState& s) const;
    VectorXd qhat_at(int k, const FactorState& s) const;
};

BsdeGridSolution lsmc_solve(const PathBundle& bundle, const CoefficientSet& coeffs,
                            const PowerUtility& utility, const LsmcOptions& opts);

// pi = (1/(1-gamma)) (sigma sigma^T)^{-1} ((mu - r 1) + sigma qhat)
StrategyTerms optimal_pi_from_qhat(const CoefficientSet& coeffs, const PowerUtility& utility,
                                   const FactorState& state, const VectorXd& qhat);

// Transformed wealth along paths from the closed exponential formula of the
// optimally controlled SDE, driven by the bundle's Brownian increments.
// Returns a (K+1) x n_paths array (step-major like PathBundle).
std::vector<double> explicit_tilde_X(const PathBundle& bundle, const CoefficientSet& coeffs,
                                     const PowerUtility& utility, const QhatField& qhat,
                                     int workers = 0);

// Forward Euler accumulation of the BSDE in log coordinates:
//   phat_{k+1} = phat_k - f(t_k, qhat_k) dt + qhat_k . dW_k
std::vector<double> simulate_phat(const PathBundle& bundle, const CoefficientSet& coeffs,
                                  const PowerUtility& utility, const QhatField& qhat,
                                  double p_hat_0, int workers = 0);

// E[U(X(T))] = (1/gamma) x^gamma e^{phat(0)}
double value_at_zero(double p_hat_0, const PowerUtility& utility);

struct ContractionDiagnostics {
    double xi_sup = 0.0;       // sampled sup over paths of int gamma r + (gt/2)|theta|^2 dt
    double xi_mean = 0.0;
    double beta = 0.0;         // 2 ||I + gt proj||_inf (the bound used by the local proof)
    double beta_statement = 0.0;  // 2 ||I - proj||_inf (the printed variant, reported alongside)
    double bound = 0.0;        // 1/(4 beta)
    double radius = 0.0;       // 1/(sqrt(2) beta)
    bool smallness_holds = false;
};

ContractionDiagnostics contraction_diagnostics(const PathBundle& bundle,
                                               const CoefficientSet& coeffs,
                                               const PowerUtility& utility, int workers = 0);

}  // namespace delayfolio
