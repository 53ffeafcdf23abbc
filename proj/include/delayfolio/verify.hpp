#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "delayfolio/delay_sde.hpp"
#include "delayfolio/fbsde_solver.hpp"

namespace delayfolio {

struct TestReport {
    std::string name;
    double statistic = 0.0;  // in standard-error units unless noted
    double threshold = 3.0;
    bool passed = false;
    std::uint64_t seed = 0;
    int n_paths = 0;
    double dt = 0.0;
    std::string note;
};

// H(pi, xt, p, q) = gamma xt { (r + pi^T(mu - r 1) - (1-gamma)/2 pi^T sigma sigma^T pi) p + pi^T sigma q }
double eval_hamiltonian(const PowerUtility& utility, const CoefficientSet& coeffs,
                        const FactorState& state, const VectorXd& pi, double xt, double p,
                        const VectorXd& q);

struct ArgmaxReport {
    VectorXd pi_analytic;
    VectorXd pi_numeric;
    double max_component_diff = 0.0;
};

// First-order-condition strategy against a derivative-free coordinate search.
ArgmaxReport argmax_check(const PowerUtility& utility, const CoefficientSet& coeffs,
                          const FactorState& state, double p, const VectorXd& q);

// E[Xt(t_j) p(t_j)] = U(x) p(0) at interior grid times, plus a regression of
// the one-step increments on the linear state basis (coefficients ~ 0).
TestReport martingale_test(const PathBundle& bundle, const std::vector<double>& xtilde,
                           const std::vector<double>& phat_paths, const PowerUtility& utility,
                           std::uint64_t seed, int n_times = 5, double threshold = 3.0);

// E[Xt^pi(t_{j+1}) p(t_{j+1})] <= E[Xt^pi(t_j) p(t_j)] + threshold * SE for
// consecutive pairs over the same interior times.
TestReport supermartingale_test(const PathBundle& bundle, const std::vector<double>& xtilde,
                                const std::vector<double>& phat_paths, const PowerUtility& utility,
                                std::uint64_t seed, int n_times = 5, double threshold = 3.0);

// Paired-difference dominance of the candidate strategies by pi_hat under
// common random numbers, plus the value identity at t = 0.
std::vector<TestReport> utility_dominance_test(const PathBundle& bundle,
                                               const CoefficientSet& coeffs,
                                               const PowerUtility& utility,
                                               const Strategy& pi_hat,
                                               const std::vector<Strategy>& candidates,
                                               double value0, std::uint64_t seed,
                                               int workers = 0, double threshold = 3.0);

}  // namespace delayfolio
