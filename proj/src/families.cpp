#include "delayfolio/families.hpp"

namespace delayfolio {

namespace {
std::function<double(const VectorXd&)> make_h(HKind kind) {
    if (kind == HKind::Zero) return [](const VectorXd&) { return 0.0; };
    return [](const VectorXd& y) { return y(0); };
}
}  // namespace

CoefficientSet make_constant_family(const ConstantFamilyParams& p) {
    p.dims.validate();
    if (p.mu0.size() != p.dims.m || p.sigma0.rows() != p.dims.m || p.sigma0.cols() != p.dims.N)
        throw ConfigError("constant family: mu/sigma shapes do not match dims");
    if (p.b0.size() != p.dims.n || p.sigmaF0.rows() != p.dims.n || p.sigmaF0.cols() != p.dims.N)
        throw ConfigError("constant family: b/sigma_F shapes do not match dims");
    CoefficientSet c;
    c.dims = p.dims;
    c.r = [r0 = p.r0](const FactorState&) { return r0; };
    c.mu = [mu0 = p.mu0](const FactorState&) { return mu0; };
    c.sigma = [s0 = p.sigma0](const FactorState&) { return s0; };
    c.b = [b0 = p.b0](const VectorXd&, double) { return b0; };
    c.sigma_F = [sF = p.sigmaF0](const VectorXd&, double) { return sF; };
    c.h = make_h(p.h_kind);
    return c;
}

CoefficientSet make_affine_family(const AffineFamilyParams& p) {
    CoefficientSet c;
    c.dims = ModelDims{1, 1, 1};
    c.r = [p](const FactorState& s) { return p.r0 + p.r_y * s.y(0) + p.r_v * s.v + p.r_z * s.z(0); };
    c.mu = [p](const FactorState& s) {
        VectorXd m(1);
        m(0) = p.mu0 + p.mu_y * s.y(0) + p.mu_v * s.v + p.mu_z * s.z(0);
        return m;
    };
    c.sigma = [p](const FactorState& s) {
        MatrixXd m(1, 1);
        m(0, 0) = p.sigma0 + p.sigma_y * s.y(0) + p.sigma_v * s.v + p.sigma_z * s.z(0);
        return m;
    };
    c.b = [p](const VectorXd& y, double v) {
        VectorXd m(1);
        m(0) = p.b0 + p.b_y * y(0) + p.b_v * v;
        return m;
    };
    c.sigma_F = [p](const VectorXd&, double) {
        MatrixXd m(1, 1);
        m(0, 0) = p.sigmaF0;
        return m;
    };
    c.h = make_h(p.h_kind);
    return c;
}

CoefficientSet make_lq_pointwise_family(const LqPointwiseParams& p, const PowerUtility& u) {
    u.validate();
    if (p.alpha3 == 0.0) throw ConfigError("lq_pointwise: alpha3 must be nonzero");
    if (!(p.sigma_F != 0.0)) throw ConfigError("lq_pointwise: sigma_F must be nonzero");
    if (!(p.sigma0 != 0.0)) throw ConfigError("lq_pointwise: sigma must be nonzero");
    const double gam = u.gamma;
    const double gt = u.gamma_tilde();
    CoefficientSet c;
    c.dims = ModelDims{1, 1, 1};
    auto theta = [p, gt](double z) { return p.alpha3 * z / (gt * p.sigma_F); };
    c.r = [p, gam, gt, theta](const FactorState& s) {
        const double th = theta(s.z(0));
        return (p.beta1 * s.y(0) + p.beta2 * s.v + p.beta3 * s.z(0) - 0.5 * gt * th * th) / gam;
    };
    c.mu = [p, gam, gt, theta](const FactorState& s) {
        const double th = theta(s.z(0));
        const double r = (p.beta1 * s.y(0) + p.beta2 * s.v + p.beta3 * s.z(0) - 0.5 * gt * th * th) / gam;
        VectorXd m(1);
        m(0) = r + p.sigma0 * th;
        return m;
    };
    c.sigma = [p](const FactorState&) {
        MatrixXd m(1, 1);
        m(0, 0) = p.sigma0;
        return m;
    };
    c.b = [p](const VectorXd& y, double v) {
        VectorXd m(1);
        m(0) = p.alpha1 * y(0) + p.alpha2 * v;
        return m;
    };
    c.sigma_F = [p](const VectorXd&, double) {
        MatrixXd m(1, 1);
        m(0, 0) = p.sigma_F;
        return m;
    };
    c.h = make_h(HKind::FirstComponent);
    return c;
}

CoefficientSet make_lq_infinite_family(const LqInfiniteParams& p, const PowerUtility& u) {
    u.validate();
    if (!(p.sigma0 != 0.0)) throw ConfigError("lq_infinite: sigma must be nonzero");
    const double gam = u.gamma;
    const double gt = u.gamma_tilde();
    CoefficientSet c;
    c.dims = ModelDims{1, 1, 1};
    c.r = [p, gam, gt](const FactorState& s) {
        return (p.beta1 * s.y(0) * s.y(0) + p.beta2 * s.v * s.v - 0.5 * gt * p.theta0 * p.theta0) / gam;
    };
    c.mu = [p, gam, gt](const FactorState& s) {
        const double r =
            (p.beta1 * s.y(0) * s.y(0) + p.beta2 * s.v * s.v - 0.5 * gt * p.theta0 * p.theta0) / gam;
        VectorXd m(1);
        m(0) = r + p.sigma0 * p.theta0;
        return m;
    };
    c.sigma = [p](const FactorState&) {
        MatrixXd m(1, 1);
        m(0, 0) = p.sigma0;
        return m;
    };
    c.b = [p, gt](const VectorXd& y, double v) {
        VectorXd m(1);
        m(0) = p.alpha1 * y(0) + p.alpha2 * v - gt * p.theta0 * p.sigma_F;
        return m;
    };
    c.sigma_F = [p](const VectorXd&, double) {
        MatrixXd m(1, 1);
        m(0, 0) = p.sigma_F;
        return m;
    };
    c.h = make_h(HKind::FirstComponent);
    return c;
}

}  // namespace delayfolio
