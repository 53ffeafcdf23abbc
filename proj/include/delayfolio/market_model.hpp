#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "delayfolio/types.hpp"

namespace delayfolio {

// Factor values on [-delta, 0]. Either a constant extension of the initial
// factor value or a user grid (linearly interpolated between nodes).
class History {
  public:
    static History constant(VectorXd value) {
        History h;
        h.constant_ = true;
        h.const_value_ = std::move(value);
        return h;
    }
    static History grid(std::vector<double> times, std::vector<VectorXd> values);

    bool is_constant() const { return constant_; }
    double left_end() const { return constant_ ? -std::numeric_limits<double>::infinity() : times_.front(); }

    // Factor value at s <= 0; throws MissingHistoryError if s is left of the grid.
    VectorXd at(double s) const;

  private:
    bool constant_ = true;
    VectorXd const_value_;
    std::vector<double> times_;       // ascending, last == 0
    std::vector<VectorXd> values_;
};

struct DelaySpec {
    double lambda = 1.0;
    double delta = 1.0;  // +infinity for the integral-only model
    History history = History::constant(VectorXd::Zero(1));

    bool infinite() const { return std::isinf(delta); }
    void validate(const VectorXd& y0) const;
};

// Market and factor coefficient evaluators. All pure functions of the
// state triple; b and sigma_F see only (y, v) per the factor dynamics.
struct CoefficientSet {
    ModelDims dims;
    std::function<double(const FactorState&)> r;
    std::function<VectorXd(const FactorState&)> mu;        // m
    std::function<MatrixXd(const FactorState&)> sigma;     // m x N
    std::function<VectorXd(const VectorXd&, double)> b;    // (y, v) -> n
    std::function<MatrixXd(const VectorXd&, double)> sigma_F;  // (y, v) -> n x N
    std::function<double(const VectorXd&)> h;              // y -> scalar
};

struct PowerUtility {
    double gamma = 0.5;
    double initial_wealth = 1.0;

    void validate() const {
        if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("utility: gamma must be in (0,1)");
        if (!(initial_wealth > 0.0)) throw ConfigError("utility: initial wealth must be positive");
    }
    double U(double x) const { return std::pow(x, gamma) / gamma; }
    double U_inv(double u) const { return std::pow(gamma * u, 1.0 / gamma); }
    double marginal(double x) const { return std::pow(x, gamma - 1.0); }
    // inverse of U'
    double I(double z) const { return std::pow(z, 1.0 / (gamma - 1.0)); }
    double gamma_tilde() const { return gamma / (1.0 - gamma); }
};

// Condition-number cutoff above which sigma*sigma^T counts as singular.
inline constexpr double kSingularConditionThreshold = 1e12;

// theta = sigma^T (sigma sigma^T)^{-1} (mu - r 1)
VectorXd eval_theta(const CoefficientSet& coeffs, const FactorState& state);

// sigma_tilde = sigma^T (sigma sigma^T)^{-1} sigma, the orthogonal projection
// onto the row space of sigma.
MatrixXd eval_projection(const CoefficientSet& coeffs, const FactorState& state);

struct AssumptionReport {
    double min_r = 0.0;
    double max_condition = 0.0;
    double lipschitz_mu = 0.0;     // sampled finite-difference bounds
    double lipschitz_sigma = 0.0;
    double lipschitz_b = 0.0;
    double lipschitz_h = 0.0;
    bool r_nonnegative = true;
    bool sigma_well_conditioned = true;
    bool pass() const { return r_nonnegative && sigma_well_conditioned; }
};

// Sampled probe of assumptions (A1)-(A4); report-only.
AssumptionReport check_assumptions(const CoefficientSet& coeffs,
                                   const std::vector<FactorState>& sample);

}  // namespace delayfolio
