#pragma once

#include <delayfolio/config.hpp>
#include <delayfolio/families.hpp>

namespace testutil {

using namespace delayfolio;

// 1-D constant market: r = 3%, mu = 8%, sigma = 0.2, factor OU(-y, 0.3)
inline CoefficientSet merton_coeffs() {
    ConstantFamilyParams p;
    p.dims = ModelDims{1, 1, 1};
    p.r0 = 0.03;
    p.mu0 = VectorXd::Constant(1, 0.08);
    p.sigma0 = MatrixXd::Constant(1, 1, 0.2);
    p.b0 = VectorXd::Zero(1);
    p.sigmaF0 = MatrixXd::Constant(1, 1, 0.3);
    p.h_kind = HKind::FirstComponent;
    return make_constant_family(p);
}

inline PowerUtility utility_half() { return PowerUtility{0.5, 1.0}; }

// valid pointwise-delay parameter set (beta3 = 0 branch of the constraints)
inline LqParams valid_pointwise_params(double sigma_F = 1.0, double alpha3 = 0.25) {
    LqParams q;
    q.lambda = 1.0;
    q.delta = std::log(2.0);
    const double eld = std::exp(q.lambda * q.delta);  // 2
    q.alpha3 = alpha3;
    q.alpha1 = 1.0 - eld * alpha3;
    q.alpha2 = (1.0 + q.lambda) * eld * alpha3;
    q.beta1 = 1.0;
    q.beta2 = alpha3 * eld;
    q.beta3 = 0.0;
    q.sigma_F = sigma_F;
    q.gamma = 0.5;
    q.T = 1.0;
    return q;
}

// the spec's derived set (beta3 = -alpha3); satisfies the algebraic
// constraints but not the terminal condition of the BSDE
inline LqParams spec_pointwise_params() {
    LqParams q = valid_pointwise_params();
    q.beta1 = 0.5;
    q.beta2 = -0.5;
    q.beta3 = -0.25;
    return q;
}

inline CoefficientSet lq_pointwise_coeffs(const LqParams& q, double sigma0 = 0.2) {
    LqPointwiseParams p;
    p.alpha1 = q.alpha1;
    p.alpha2 = q.alpha2;
    p.alpha3 = q.alpha3;
    p.beta1 = q.beta1;
    p.beta2 = q.beta2;
    p.beta3 = q.beta3;
    p.sigma0 = sigma0;
    p.sigma_F = q.sigma_F;
    return make_lq_pointwise_family(p, PowerUtility{q.gamma, 1.0});
}

inline DelaySpec pointwise_delay(const LqParams& q, const VectorXd& y0) {
    DelaySpec d;
    d.lambda = q.lambda;
    d.delta = q.delta;
    d.history = History::constant(y0);
    return d;
}

inline FactorState state1(double y, double v, double z) {
    FactorState s;
    s.y = VectorXd::Constant(1, y);
    s.v = v;
    s.z = VectorXd::Constant(1, z);
    return s;
}

}  // namespace testutil
