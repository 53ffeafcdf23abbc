#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "delayfolio/market_model.hpp"

namespace delayfolio {

struct TimeGrid {
    double T = 1.0;
    int K = 1;

    static TimeGrid make(double horizon, int steps) {
        if (!(horizon > 0.0)) throw ConfigError("grid: horizon must be positive");
        if (steps < 1) throw ConfigError("grid: need at least one step");
        return TimeGrid{horizon, steps};
    }
    double dt() const { return T / K; }
    double t(int k) const { return T * k / K; }

    // Delay lag in whole steps. delta is snapped to the nearest grid
    // multiple; callers can compare lag*dt against delta to report drift.
    int lag_steps(double delta) const {
        const int lag = static_cast<int>(std::lround(delta / dt()));
        if (lag < 1) throw ConfigError("grid: delta is smaller than half a time step");
        return lag;
    }
};

// Simulated factor system. Arrays are indexed step-major with paths
// contiguous: value(k, component, path) = data[(k*n + component)*n_paths + path].
struct PathBundle {
    TimeGrid grid;
    int n = 1;        // factor dimension
    int N = 1;        // Brownian dimension
    int n_paths = 0;
    std::vector<double> Y;   // (K+1) * n * n_paths
    std::vector<double> V;   // (K+1) * n_paths
    std::vector<double> Z;   // (K+1) * n * n_paths
    std::vector<double> dW;  // K * N * n_paths

    double y(int k, int c, std::size_t p) const { return Y[(static_cast<std::size_t>(k) * n + c) * n_paths + p]; }
    double v(int k, std::size_t p) const { return V[static_cast<std::size_t>(k) * n_paths + p]; }
    double z(int k, int c, std::size_t p) const { return Z[(static_cast<std::size_t>(k) * n + c) * n_paths + p]; }
    double dw(int k, int c, std::size_t p) const { return dW[(static_cast<std::size_t>(k) * N + c) * n_paths + p]; }

    FactorState state(int k, std::size_t p) const {
        FactorState s;
        s.y.resize(n);
        s.z.resize(n);
        for (int c = 0; c < n; ++c) {
            s.y(c) = y(k, c, p);
            s.z(c) = z(k, c, p);
        }
        s.v = v(k, p);
        return s;
    }
    VectorXd dw_vec(int k, std::size_t p) const {
        VectorXd w(N);
        for (int c = 0; c < N; ++c) w(c) = dw(k, c, p);
        return w;
    }
};

struct SimOptions {
    std::uint64_t seed = 12345;
    int workers = 0;          // 0 = hardware
    bool antithetic = false;  // mirror the upper half of the paths
};

// V(0) = int_{-delta}^0 e^{lambda s} h(Y(s)) ds by trapezoidal quadrature.
// Infinite delta truncates where the weight drops below 1e-12.
double init_V(const History& history, const DelaySpec& delay,
              const std::function<double(const VectorXd&)>& h);

PathBundle simulate_factors(const CoefficientSet& coeffs, const DelaySpec& delay,
                            const TimeGrid& grid, const VectorXd& y0, int n_paths,
                            const SimOptions& opts);

using Strategy = std::function<VectorXd(double t, const FactorState&)>;

struct WealthPaths {
    int n_paths = 0;
    int K = 0;
    int m = 1;
    std::vector<double> X;       // (K+1) * n_paths, always positive
    std::vector<double> Xtilde;  // (K+1) * n_paths
    std::vector<double> pi;      // K * m * n_paths (strategy actually used)

    double x(int k, std::size_t p) const { return X[static_cast<std::size_t>(k) * n_paths + p]; }
    double xtilde(int k, std::size_t p) const { return Xtilde[static_cast<std::size_t>(k) * n_paths + p]; }
    double pi_at(int k, int c, std::size_t p) const { return pi[(static_cast<std::size_t>(k) * m + c) * n_paths + p]; }
};

// Wealth under a strategy, simulated in log coordinates against the same
// Brownian increments as the factor bundle (common random numbers).
WealthPaths simulate_wealth(const PathBundle& bundle, const CoefficientSet& coeffs,
                            const PowerUtility& utility, const Strategy& strategy,
                            int workers = 0);

// Variant for strategies indexed by (step, path), e.g. regression output.
using PathStrategy = std::function<VectorXd(int k, std::size_t p, const FactorState&)>;
WealthPaths simulate_wealth_indexed(const PathBundle& bundle, const CoefficientSet& coeffs,
                                    const PowerUtility& utility, const PathStrategy& strategy,
                                    int workers = 0);

}  // namespace delayfolio
