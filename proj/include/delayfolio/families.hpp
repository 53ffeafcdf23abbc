#pragma once

#include "delayfolio/market_model.hpp"

namespace delayfolio {

// Built-in coefficient families. Anything not covered here can still be
// expressed by filling CoefficientSet with custom evaluators (all fields
// are plain std::function), or by registering a named factory with the
// config layer.

enum class HKind { Zero, FirstComponent };

struct ConstantFamilyParams {
    ModelDims dims;
    double r0 = 0.0;
    VectorXd mu0;      // m
    MatrixXd sigma0;   // m x N
    VectorXd b0;       // n
    MatrixXd sigmaF0;  // n x N
    HKind h_kind = HKind::FirstComponent;
};
CoefficientSet make_constant_family(const ConstantFamilyParams& p);

// One-dimensional affine coefficients: each scalar field c(y,v,z) = c0 + cy y + cv v + cz z.
struct AffineFamilyParams {
    double r0 = 0.0, r_y = 0.0, r_v = 0.0, r_z = 0.0;
    double mu0 = 0.0, mu_y = 0.0, mu_v = 0.0, mu_z = 0.0;
    double sigma0 = 0.2, sigma_y = 0.0, sigma_v = 0.0, sigma_z = 0.0;
    double b0 = 0.0, b_y = 0.0, b_v = 0.0;
    double sigmaF0 = 0.0;
    HKind h_kind = HKind::FirstComponent;
};
CoefficientSet make_affine_family(const AffineFamilyParams& p);

// Pointwise-delay linear family (1-D): built so that
//   b(y,v) + gamma_tilde * theta * sigma_F = alpha1 y + alpha2 v + alpha3 z
//   gamma r + (gamma_tilde/2) theta^2     = beta1 y + beta2 v + beta3 z
// with sigma and sigma_F constant and h(y) = y. The z-dependence of the
// drift identity is carried by theta(z) = alpha3 z / (gamma_tilde sigma_F),
// keeping b a function of (y, v) only.
struct LqPointwiseParams {
    double alpha1 = 0.0, alpha2 = 0.0, alpha3 = 0.0;
    double beta1 = 0.0, beta2 = 0.0, beta3 = 0.0;
    double sigma0 = 0.2;   // constant asset volatility
    double sigma_F = 1.0;  // constant factor volatility
};
CoefficientSet make_lq_pointwise_family(const LqPointwiseParams& p, const PowerUtility& u);

// Infinite-delay LQ family (1-D, no Z): constant theta0, and
//   b(y,v) + gamma_tilde * theta0 * sigma_F = alpha1 y + alpha2 v
//   gamma r + (gamma_tilde/2) theta0^2     = beta1 y^2 + beta2 v^2
struct LqInfiniteParams {
    double alpha1 = 0.0, alpha2 = 0.0;
    double beta1 = -1.0, beta2 = -1.0;
    double theta0 = 0.0;
    double sigma0 = 0.2;
    double sigma_F = 1.0;
};
CoefficientSet make_lq_infinite_family(const LqInfiniteParams& p, const PowerUtility& u);

}  // namespace delayfolio
