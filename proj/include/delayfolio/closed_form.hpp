#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "delayfolio/delay_sde.hpp"
#include "delayfolio/market_model.hpp"

namespace delayfolio {

// Parameters of the two explicitly solvable specifications. The infinite
// case uses (alpha1, alpha2, beta1, beta2); the pointwise case also uses
// (alpha3, beta3) and a finite delta.
struct LqParams {
    double alpha1 = 1.0, alpha2 = 1.0, alpha3 = 0.0;
    double beta1 = -1.0, beta2 = -1.0, beta3 = 0.0;
    double sigma_F = 1.0;
    double lambda = 1.0;
    double delta = std::numeric_limits<double>::infinity();
    double gamma = 0.5;
    double T = 1.0;
};

// psi_1..psi_4 of the quadratic ansatz eta = psi1 y^2/2 + psi2 v^2/2 + psi3 y v + psi4
// on a uniform grid over [0, T], integrated backward from psi_i(T) = 0.
struct RiccatiSolution {
    double T = 1.0;
    int K = 0;
    std::array<std::vector<double>, 4> psi;  // index 0..3 -> psi1..psi4, length K+1

    double t(int k) const { return T * k / K; }
    // linear interpolation in t
    double value(int i, double t) const;
};

struct RiccatiOptions {
    int steps = 1000;
    double blow_up_threshold = 1e8;
};

RiccatiSolution solve_riccati(const LqParams& params, const RiccatiOptions& opts = {});

struct EtaValue {
    double eta = 0.0;
    double deta_dy = 0.0;
};
EtaValue eta_lq(const RiccatiSolution& sol, double t, double y, double v);

// pi for the infinite-delay 1-D case: Merton term + sigma_F d_y eta / ((1-gamma) sigma)
StrategyTerms optimal_pi_infinite(const RiccatiSolution& sol, const CoefficientSet& coeffs,
                                  const PowerUtility& utility, double t, double y, double v);

struct FeynmanKacResult {
    double eta = 0.0;
    double std_error = 0.0;      // of eta, via the delta method
    double max_exponent = 0.0;   // largest path exponent seen
};

struct FeynmanKacOptions {
    int n_paths = 100000;
    int steps = 400;
    std::uint64_t seed = 12345;
    int workers = 0;
    bool antithetic = true;
};

// Monte Carlo evaluation of eta(t0=0, y, v) for no-Z coefficient sets:
// eta = (1-gamma) log E exp{ int_0^T gamma_tilde r + (gamma_tilde/(2(1-gamma))) theta^2 ds }
// under the tilted factor drift b + gamma_tilde theta sigma_F.
FeynmanKacResult feynman_kac_eta(const CoefficientSet& coeffs, const PowerUtility& utility,
                                 const DelaySpec& delay, double T, double y, double v,
                                 const FeynmanKacOptions& opts);

struct ConstraintReport {
    std::array<double, 4> residuals{};  // the four identities of the pointwise case
    bool pass = false;
};
ConstraintReport check_pointwise_constraints(const LqParams& params);

// Pointwise-delay closed form:
//   Q(t)   = e^{T-t} - 1
//   psi(t) = sigma_F^2/(2(1-gamma)) { (e^{2(T-t)}-1)/2 + 2c(1-e^{T-t}) + c^2 (T-t) },  c = 1 + beta3/alpha3
//   phat(t,y,v) = Q(t)(y + e^{lambda delta} alpha3 v) - (beta3/alpha3) y + psi(t)
//   qhat(t) = sigma_F (e^{T-t} - 1 - beta3/alpha3)
struct PointwiseSolution {
    LqParams params;
    double Q(double t) const;
    double psi(double t) const;
    double phat(double t, double y, double v) const;
    double qhat(double t) const;
};

PointwiseSolution pointwise_solution(const LqParams& params);

StrategyTerms pointwise_pi(const PointwiseSolution& sol, const CoefficientSet& coeffs,
                           const PowerUtility& utility, double t, const FactorState& state);

}  // namespace delayfolio
