#include "delayfolio/delay_sde.hpp"

#include <cmath>

#include "delayfolio/parallel.hpp"
#include "delayfolio/rng.hpp"

namespace delayfolio {

double init_V(const History& history, const DelaySpec& delay,
              const std::function<double(const VectorXd&)>& h) {
    double left;
    if (delay.infinite()) {
        left = -std::log(1e12) / delay.lambda;  // e^{lambda s} < 1e-12 beyond this
    } else {
        left = -delay.delta;
        if (history.left_end() > left + 1e-12)
            throw MissingHistoryError("init_V: history does not cover [-delta, 0]");
    }
    const int panels = 4096;
    const double ds = -left / panels;
    double acc = 0.0;
    double prev = std::exp(delay.lambda * left) * h(history.at(left));
    for (int i = 1; i <= panels; ++i) {
        const double s = left + ds * i;
        const double cur = std::exp(delay.lambda * s) * h(history.at(s));
        acc += 0.5 * (prev + cur) * ds;
        prev = cur;
    }
    return acc;
}

PathBundle simulate_factors(const CoefficientSet& coeffs, const DelaySpec& delay,
                            const TimeGrid& grid, const VectorXd& y0, int n_paths,
                            const SimOptions& opts) {
    if (n_paths < 1) throw ConfigError("simulate_factors: need at least one path");
    if (opts.antithetic && n_paths % 2 != 0)
        throw ConfigError("simulate_factors: antithetic requires an even path count");
    delay.validate(y0);
    const int n = coeffs.dims.n;
    const int N = coeffs.dims.N;
    if (y0.size() != n) throw ConfigError("simulate_factors: y0 has wrong dimension");
    const int K = grid.K;
    const double dt = grid.dt();
    const double sdt = std::sqrt(dt);
    const bool inf_delay = delay.infinite();
    const int lag = inf_delay ? 0 : grid.lag_steps(delay.delta);
    const double decay = std::exp(-delay.lambda * dt);
    const double zdecay = inf_delay ? 0.0 : std::exp(-delay.lambda * delay.delta);
    const double v0 = init_V(delay.history, delay, coeffs.h);

    PathBundle b;
    b.grid = grid;
    b.n = n;
    b.N = N;
    b.n_paths = n_paths;
    b.Y.resize(static_cast<std::size_t>(K + 1) * n * n_paths);
    b.V.resize(static_cast<std::size_t>(K + 1) * n_paths);
    b.Z.resize(static_cast<std::size_t>(K + 1) * n * n_paths);
    b.dW.resize(static_cast<std::size_t>(K) * N * n_paths);

    // History lookup at grid time index j <= 0. The snapped lag can point a
    // fraction of a step left of -delta; clamp into the covered range.
    auto hist_y = [&](int j) -> VectorXd {
        double s = j * dt;
        if (!inf_delay && s < -delay.delta) s = -delay.delta;
        return delay.history.at(s);
    };

    const std::size_t np = static_cast<std::size_t>(n_paths);
    const std::size_t half = opts.antithetic ? np / 2 : np;

    parallel_for(np, opts.workers, [&](std::size_t lo, std::size_t hi) {
        VectorXd y(n), ynext(n), zv(n), znext(n), bdrift(n);
        MatrixXd sF(n, N);
        VectorXd dw(N);
        for (std::size_t p = lo; p < hi; ++p) {
            const bool mirror = opts.antithetic && p >= half;
            PathRng rng(opts.seed, mirror ? p - half : p);
            const double sign = mirror ? -1.0 : 1.0;
            y = y0;
            double v = v0;
            zv = inf_delay ? y0 : hist_y(-lag);
            double g_prev = coeffs.h(y) - (inf_delay ? 0.0 : zdecay * coeffs.h(zv));
            for (int c = 0; c < n; ++c) {
                b.Y[(0 * n + c) * np + p] = y(c);
                b.Z[(0 * n + c) * np + p] = zv(c);
            }
            b.V[0 * np + p] = v;
            for (int k = 0; k < K; ++k) {
                for (int c = 0; c < N; ++c) {
                    dw(c) = sign * rng.next_normal() * sdt;
                    b.dW[(static_cast<std::size_t>(k) * N + c) * np + p] = dw(c);
                }
                bdrift = coeffs.b(y, v);
                sF = coeffs.sigma_F(y, v);
                ynext = y + bdrift * dt + sF * dw;
                // pointwise delay value at step k+1
                if (inf_delay) {
                    znext = ynext;
                } else if (k + 1 >= lag) {
                    const int src = k + 1 - lag;
                    for (int c = 0; c < n; ++c) znext(c) = b.Y[(static_cast<std::size_t>(src) * n + c) * np + p];
                } else {
                    znext = hist_y(k + 1 - lag);
                }
                const double g_next =
                    coeffs.h(ynext) - (inf_delay ? 0.0 : zdecay * coeffs.h(znext));
                // exact exponential integrator for dV = (g - lambda V) dt
                const double vnext = decay * v + 0.5 * dt * (decay * g_prev + g_next);
                if (!std::isfinite(vnext) || !ynext.allFinite())
                    throw NonFiniteError("simulate_factors: non-finite value at step " +
                                         std::to_string(k + 1) + ", path " + std::to_string(p));
                y = ynext;
                v = vnext;
                zv = znext;
                g_prev = g_next;
                for (int c = 0; c < n; ++c) {
                    b.Y[(static_cast<std::size_t>(k + 1) * n + c) * np + p] = y(c);
                    b.Z[(static_cast<std::size_t>(k + 1) * n + c) * np + p] = zv(c);
                }
                b.V[static_cast<std::size_t>(k + 1) * np + p] = v;
            }
        }
    });
    return b;
}

WealthPaths simulate_wealth(const PathBundle& bundle, const CoefficientSet& coeffs,
                            const PowerUtility& utility, const Strategy& strategy,
                            int workers) {
    return simulate_wealth_indexed(
        bundle, coeffs, utility,
        [&](int k, std::size_t, const FactorState& s) { return strategy(bundle.grid.t(k), s); },
        workers);
}

WealthPaths simulate_wealth_indexed(const PathBundle& bundle, const CoefficientSet& coeffs,
                                    const PowerUtility& utility, const PathStrategy& strategy,
                                    int workers) {
    utility.validate();
    const int K = bundle.grid.K;
    const int m = coeffs.dims.m;
    const double dt = bundle.grid.dt();
    const std::size_t np = static_cast<std::size_t>(bundle.n_paths);

    WealthPaths w;
    w.n_paths = bundle.n_paths;
    w.K = K;
    w.m = m;
    w.X.resize(static_cast<std::size_t>(K + 1) * np);
    w.Xtilde.resize(static_cast<std::size_t>(K + 1) * np);
    w.pi.resize(static_cast<std::size_t>(K) * m * np);

    parallel_for(np, workers, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) {
            double logx = std::log(utility.initial_wealth);
            w.X[p] = utility.initial_wealth;
            w.Xtilde[p] = utility.U(utility.initial_wealth);
            for (int k = 0; k < K; ++k) {
                const FactorState s = bundle.state(k, p);
                const VectorXd pi = strategy(k, p, s);
                if (pi.size() != m || !pi.allFinite())
                    throw NonFiniteError("simulate_wealth: bad strategy value at step " +
                                         std::to_string(k) + ", path " + std::to_string(p));
                const double r = coeffs.r(s);
                const VectorXd excess = coeffs.mu(s) - r * VectorXd::Ones(m);
                const MatrixXd sigma = coeffs.sigma(s);
                const VectorXd vol = sigma.transpose() * pi;  // N
                double dlogx = (r + pi.dot(excess) - 0.5 * vol.squaredNorm()) * dt;
                for (int c = 0; c < bundle.N; ++c) dlogx += vol(c) * bundle.dw(k, c, p);
                logx += dlogx;
                const double x = std::exp(logx);
                if (!std::isfinite(x))
                    throw NonFiniteError("simulate_wealth: non-finite wealth at step " +
                                         std::to_string(k + 1) + ", path " + std::to_string(p));
                w.X[static_cast<std::size_t>(k + 1) * np + p] = x;
                w.Xtilde[static_cast<std::size_t>(k + 1) * np + p] = utility.U(x);
                for (int c = 0; c < m; ++c)
                    w.pi[(static_cast<std::size_t>(k) * m + c) * np + p] = pi(c);
            }
        }
    });
    return w;
}

}  // namespace delayfolio
