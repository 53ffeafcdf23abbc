#include "delayfolio/market_model.hpp"

#include <algorithm>
#include <cmath>

namespace delayfolio {

History History::grid(std::vector<double> times, std::vector<VectorXd> values) {
    if (times.size() != values.size() || times.size() < 2)
        throw ConfigError("history grid needs matching times/values with at least two nodes");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw ConfigError("history grid times must be strictly increasing");
    if (std::abs(times.back()) > 1e-12) throw ConfigError("history grid must end at s = 0");
    History h;
    h.constant_ = false;
    h.times_ = std::move(times);
    h.values_ = std::move(values);
    return h;
}

VectorXd History::at(double s) const {
    if (s > 1e-12) throw MissingHistoryError("history queried at s > 0");
    if (constant_) return const_value_;
    if (s < times_.front() - 1e-12)
        throw MissingHistoryError("history buffer does not cover [-delta, 0]");
    const auto it = std::lower_bound(times_.begin(), times_.end(), s);
    std::size_t hi = static_cast<std::size_t>(it - times_.begin());
    if (hi == 0) return values_.front();
    if (hi >= times_.size()) return values_.back();
    const std::size_t lo = hi - 1;
    const double w = (s - times_[lo]) / (times_[hi] - times_[lo]);
    return (1.0 - w) * values_[lo] + w * values_[hi];
}

void DelaySpec::validate(const VectorXd& y0) const {
    if (!(lambda > 0.0)) throw ConfigError("delay: lambda must be positive");
    if (!(delta > 0.0)) throw ConfigError("delay: delta must be positive");
    if (infinite() && !history.is_constant())
        throw ConfigError("delay: infinite delta requires a constant history");
    if (!infinite() && history.left_end() > -delta + 1e-12)
        throw MissingHistoryError("delay: history does not cover [-delta, 0]");
    const VectorXd h0 = history.at(0.0);
    if ((h0 - y0).cwiseAbs().maxCoeff() > 1e-9)
        throw ConfigError("delay: history(0) must equal the initial factor value");
}

namespace {

struct SigmaFactor {
    MatrixXd gram;       // sigma sigma^T, m x m
    Eigen::LDLT<MatrixXd> ldlt;
    double condition;
    bool scalar = false;
    double inv_gram = 0.0;
};

SigmaFactor factor_sigma(const MatrixXd& sigma) {
    SigmaFactor f;
    if (sigma.rows() == 1) {
        const double g = sigma.row(0).squaredNorm();
        if (!(g > 0.0) || !std::isfinite(g))
            throw SingularMatrixError("sigma*sigma^T numerically singular (zero row)");
        f.scalar = true;
        f.inv_gram = 1.0 / g;
        f.condition = 1.0;
        return f;
    }
    f.gram = sigma * sigma.transpose();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(f.gram);
    const double lmax = es.eigenvalues().maxCoeff();
    const double lmin = es.eigenvalues().minCoeff();
    f.condition = (lmin <= 0.0) ? std::numeric_limits<double>::infinity() : lmax / lmin;
    if (!(f.condition < kSingularConditionThreshold))
        throw SingularMatrixError("sigma*sigma^T numerically singular (condition " +
                                  std::to_string(f.condition) + ")");
    f.ldlt.compute(f.gram);
    return f;
}

}  // namespace

VectorXd eval_theta(const CoefficientSet& coeffs, const FactorState& state) {
    const MatrixXd sigma = coeffs.sigma(state);
    const SigmaFactor f = factor_sigma(sigma);
    const VectorXd excess = coeffs.mu(state) - coeffs.r(state) * VectorXd::Ones(coeffs.dims.m);
    if (f.scalar) return sigma.transpose() * (excess * f.inv_gram);
    return sigma.transpose() * f.ldlt.solve(excess);
}

MatrixXd eval_projection(const CoefficientSet& coeffs, const FactorState& state) {
    const MatrixXd sigma = coeffs.sigma(state);
    const SigmaFactor f = factor_sigma(sigma);
    if (f.scalar) return sigma.transpose() * (sigma * f.inv_gram);
    return sigma.transpose() * f.ldlt.solve(sigma);
}

AssumptionReport check_assumptions(const CoefficientSet& coeffs,
                                   const std::vector<FactorState>& sample) {
    if (sample.empty()) throw ConfigError("check_assumptions: empty state sample");
    AssumptionReport rep;
    rep.min_r = std::numeric_limits<double>::infinity();
    for (const auto& s : sample) {
        rep.min_r = std::min(rep.min_r, coeffs.r(s));
        const MatrixXd sigma = coeffs.sigma(s);
        const MatrixXd gram = sigma * sigma.transpose();
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram);
        const double lmax = es.eigenvalues().maxCoeff();
        const double lmin = es.eigenvalues().minCoeff();
        const double cond = (lmin <= 0.0) ? std::numeric_limits<double>::infinity() : lmax / lmin;
        rep.max_condition = std::max(rep.max_condition, cond);
    }
    // finite-difference Lipschitz probes between consecutive sample points
    for (std::size_t i = 1; i < sample.size(); ++i) {
        const auto& a = sample[i - 1];
        const auto& bst = sample[i];
        double dist = std::sqrt((a.y - bst.y).squaredNorm() + (a.v - bst.v) * (a.v - bst.v) +
                                (a.z - bst.z).squaredNorm());
        if (dist < 1e-14) continue;
        rep.lipschitz_mu = std::max(rep.lipschitz_mu, (coeffs.mu(a) - coeffs.mu(bst)).norm() / dist);
        rep.lipschitz_sigma =
            std::max(rep.lipschitz_sigma, (coeffs.sigma(a) - coeffs.sigma(bst)).norm() / dist);
        rep.lipschitz_b = std::max(
            rep.lipschitz_b, (coeffs.b(a.y, a.v) - coeffs.b(bst.y, bst.v)).norm() / dist);
        rep.lipschitz_h = std::max(rep.lipschitz_h,
                                   std::abs(coeffs.h(a.y) - coeffs.h(bst.y)) / dist);
    }
    rep.r_nonnegative = rep.min_r >= 0.0;
    rep.sigma_well_conditioned = rep.max_condition < kSingularConditionThreshold;
    return rep;
}

}  // namespace delayfolio
