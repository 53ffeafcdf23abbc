#include "delayfolio/fbsde_solver.hpp"

#include <atomic>
#include <cmath>

#include "delayfolio/parallel.hpp"

namespace delayfolio {

double driver_f(const CoefficientSet& coeffs, const PowerUtility& utility,
                const FactorState& state, const VectorXd& qhat) {
    const double gt = utility.gamma_tilde();
    const VectorXd theta = eval_theta(coeffs, state);
    const MatrixXd proj = eval_projection(coeffs, state);
    const double quad = qhat.squaredNorm() + gt * qhat.dot(proj * qhat);
    return utility.gamma * coeffs.r(state) + 0.5 * gt * theta.squaredNorm() + 0.5 * quad +
           gt * theta.dot(qhat);
}

VectorXd BsdeGridSolution::raw_vars(const FactorState& s) const {
    VectorXd raw(n_state_vars);
    int idx = 0;
    for (int c = 0; c < s.y.size(); ++c) raw(idx++) = s.y(c);
    raw(idx++) = s.v;
    if (include_z)
        for (int c = 0; c < s.z.size(); ++c) raw(idx++) = s.z(c);
    return raw;
}

namespace {

double eval_basis_at(const PolyBasis& basis, const VectorXd& mean, const VectorXd& scale,
                     const VectorXd& coef, const VectorXd& raw) {
    const int nv = basis.n_vars;
    double std_vals[16];
    for (int j = 0; j < nv; ++j)
        std_vals[j] = scale(j) > 0.0 ? (raw(j) - mean(j)) / scale(j) : 0.0;
    double acc = 0.0;
    for (int t = 0; t < basis.n_terms(); ++t) {
        bool dead = false;
        double val = 1.0;
        for (int j = 0; j < nv; ++j) {
            const int e = basis.exps[t][j];
            if (e > 0 && scale(j) == 0.0) {
                dead = true;
                break;
            }
            for (int q = 0; q < e; ++q) val *= std_vals[j];
        }
        if (!dead) acc += coef(t) * val;
    }
    return acc;
}

// Per-step cache of the driver's state ingredients, so the backward loop
// never re-enters the coefficient evaluators path by path.
struct StepCoefficientCache {
    std::vector<double> r;      // np
    std::vector<double> theta;  // N * np
    std::vector<double> proj;   // N * N * np (symmetric, stored dense)

    void fill(const PathBundle& bundle, const CoefficientSet& coeffs, int k, int workers) {
        const std::size_t np = static_cast<std::size_t>(bundle.n_paths);
        const int N = bundle.N;
        r.resize(np);
        theta.resize(static_cast<std::size_t>(N) * np);
        proj.resize(static_cast<std::size_t>(N) * N * np);
        parallel_for(np, workers, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t p = lo; p < hi; ++p) {
                const FactorState s = bundle.state(k, p);
                r[p] = coeffs.r(s);
                const VectorXd th = eval_theta(coeffs, s);
                const MatrixXd pr = eval_projection(coeffs, s);
                for (int c = 0; c < N; ++c) theta[static_cast<std::size_t>(c) * np + p] = th(c);
                for (int a = 0; a < N; ++a)
                    for (int b = 0; b < N; ++b)
                        proj[(static_cast<std::size_t>(a) * N + b) * np + p] = pr(a, b);
            }
        });
    }

    // f(state, q) with an optionally separate argument for the quadratic part
    double f(const PowerUtility& u, std::size_t np, std::size_t p, int N, const double* q,
             const double* q_quad) const {
        const double gt = u.gamma_tilde();
        double th2 = 0.0, thq = 0.0, qq = 0.0, qpq = 0.0;
        for (int a = 0; a < N; ++a) {
            const double th = theta[static_cast<std::size_t>(a) * np + p];
            th2 += th * th;
            thq += th * q[a];
            qq += q_quad[a] * q_quad[a];
            for (int b = 0; b < N; ++b)
                qpq += q_quad[a] * proj[(static_cast<std::size_t>(a) * N + b) * np + p] * q_quad[b];
        }
        return u.gamma * r[p] + 0.5 * gt * th2 + 0.5 * (qq + gt * qpq) + gt * thq;
    }
};

}  // namespace

double BsdeGridSolution::phat_at(int k, const FactorState& s) const {
    return eval_basis_at(basis, means.at(k), scales.at(k), coef_p.at(k), raw_vars(s));
}

VectorXd BsdeGridSolution::qhat_at(int k, const FactorState& s) const {
    const VectorXd raw = raw_vars(s);
    const MatrixXd& cq = coef_q.at(k);
    VectorXd q(cq.rows());
    for (int c = 0; c < cq.rows(); ++c) {
        VectorXd coef = cq.row(c).transpose();
        double std_vals_acc = eval_basis_at(basis, means.at(k), scales.at(k), coef, raw);
        q(c) = std_vals_acc;
    }
    return q;
}

BsdeGridSolution lsmc_solve(const PathBundle& bundle, const CoefficientSet& coeffs,
                            const PowerUtility& utility, const LsmcOptions& opts) {
    utility.validate();
    opts.basis.validate();
    if (opts.picard_sweeps < 1) throw ConfigError("lsmc: need at least one sweep");
    if (!(opts.clip_bound > 0.0)) throw ConfigError("lsmc: clip bound must be positive");
    const int K = bundle.grid.K;
    const int n = bundle.n;
    const int N = bundle.N;
    const std::size_t np = static_cast<std::size_t>(bundle.n_paths);
    const double dt = bundle.grid.dt();
    const bool include_z = [&] {
        // Z duplicates Y when the delay is infinite (the bundle stores Z = Y);
        // keep it out of the basis in that case.
        for (std::size_t p = 0; p < std::min<std::size_t>(np, 16); ++p)
            for (int c = 0; c < n; ++c)
                if (bundle.z(K, c, p) != bundle.y(K, c, p)) return true;
        return false;
    }();
    const int n_vars = n + 1 + (include_z ? n : 0);

    BsdeGridSolution sol;
    sol.grid = bundle.grid;
    sol.include_z = include_z;
    sol.n_state_vars = n_vars;
    sol.basis = PolyBasis::make(n_vars, opts.basis);
    const int nt = sol.basis.n_terms();
    if (nt >= bundle.n_paths / 10)
        throw ConfigError("lsmc: basis has too many terms for the path count");
    sol.means.assign(K + 1, VectorXd());
    sol.scales.assign(K + 1, VectorXd());
    sol.coef_p.assign(K + 1, VectorXd::Zero(nt));
    sol.coef_q.assign(K + 1, MatrixXd::Zero(N, nt));

    auto var_ptr = [&](int k, int j) -> const double* {
        if (j < n) return &bundle.Y[(static_cast<std::size_t>(k) * n + j) * np];
        if (j == n) return &bundle.V[static_cast<std::size_t>(k) * np];
        return &bundle.Z[(static_cast<std::size_t>(k) * n + (j - n - 1)) * np];
    };

    std::vector<double> phat(np, 0.0);
    std::vector<double> pbar(np, 0.0);
    std::vector<double> target(np, 0.0);
    std::vector<std::vector<double>> qarr(N, std::vector<double>(np));
    std::vector<std::vector<double>> qold(N, std::vector<double>(np));
    std::vector<std::vector<double>> prev_phat(K + 1, std::vector<double>());
    std::vector<MatrixXd> prev_coef_q;
    StepCoefficientCache cache;

    std::atomic<long> clips{0};
    int delta_increases = 0;

    for (int sweep = 0; sweep < opts.picard_sweeps; ++sweep) {
        const bool freeze_quadratic = sweep > 0;
        std::fill(phat.begin(), phat.end(), 0.0);  // terminal condition
        double sweep_delta = 0.0;
        for (int k = K - 1; k >= 0; --k) {
            StepRegression reg(sol.basis, np, k);
            for (int j = 0; j < n_vars; ++j) reg.set_var(j, var_ptr(k, j));
            reg.build(opts.workers);

            const VectorXd cp_next = reg.fit(phat.data());
            reg.predict(cp_next, pbar.data(), opts.workers);

            // qhat components by martingale-increment regression; the fitted
            // conditional mean acts as a control variate (identical
            // conditional expectation, far smaller variance)
            MatrixXd cq(N, nt);
            for (int c = 0; c < N; ++c) {
                const double* dw = &bundle.dW[(static_cast<std::size_t>(k) * N + c) * np];
                parallel_for(np, opts.workers, [&](std::size_t lo, std::size_t hi) {
                    for (std::size_t p = lo; p < hi; ++p)
                        target[p] = (phat[p] - pbar[p]) * dw[p] / dt;
                });
                cq.row(c) = reg.fit(target.data()).transpose();
                reg.predict(cq.row(c).transpose(), qarr[c].data(), opts.workers);
                if (freeze_quadratic)
                    reg.predict(prev_coef_q[k].row(c).transpose(), qold[c].data(), opts.workers);
            }
            sol.coef_q[k] = cq;
            sol.means[k] = reg.means();
            sol.scales[k] = reg.scales();

            cache.fill(bundle, coeffs, k, opts.workers);
            const double bound = opts.clip_bound;
            parallel_for(np, opts.workers, [&](std::size_t lo, std::size_t hi) {
                long local_clips = 0;
                double qv[8], qq[8];
                for (std::size_t p = lo; p < hi; ++p) {
                    for (int c = 0; c < N; ++c) {
                        double q = qarr[c][p];
                        if (std::abs(q) > bound) {
                            q = std::clamp(q, -bound, bound);
                            ++local_clips;
                        }
                        qv[c] = q;
                        qq[c] = q;
                        if (freeze_quadratic) {
                            double qo = std::clamp(qold[c][p], -bound, bound);
                            qq[c] = qo;
                        }
                    }
                    const double f = cache.f(utility, np, p, N, qv, qq);
                    const double val = pbar[p] + f * dt;
                    if (!std::isfinite(val))
                        throw NonFiniteError("lsmc: non-finite phat at step " + std::to_string(k));
                    phat[p] = val;
                }
                if (local_clips > 0) clips += local_clips;
            });

            sol.coef_p[k] = reg.fit(phat.data());

            if (sweep > 0 && !prev_phat[k].empty()) {
                double d = 0.0;
                for (std::size_t p = 0; p < np; ++p)
                    d = std::max(d, std::abs(phat[p] - prev_phat[k][p]));
                sweep_delta = std::max(sweep_delta, d);
            }
            prev_phat[k].assign(phat.begin(), phat.end());
        }
        if (sweep > 0) {
            if (!sol.picard_deltas.empty() && sweep_delta > sol.picard_deltas.back()) {
                if (++delta_increases >= 2)
                    throw NumericError("lsmc: Picard sweeps diverging (sup-change grew twice)");
            } else if (sweep > 1) {
                delta_increases = 0;
            }
            sol.picard_deltas.push_back(sweep_delta);
        }
        prev_coef_q = sol.coef_q;
    }

    // standardization metadata for the terminal step (coefficients stay zero)
    {
        StepRegression regK(sol.basis, np, K);
        for (int j = 0; j < n_vars; ++j) regK.set_var(j, var_ptr(K, j));
        regK.build(opts.workers);
        sol.means[K] = regK.means();
        sol.scales[K] = regK.scales();
    }

    // the state at t = 0 is deterministic, so the step-0 regression collapses
    // to the cross-path intercept
    double acc = 0.0;
    for (std::size_t p = 0; p < np; ++p) acc += phat[p];
    sol.p_hat_0 = acc / static_cast<double>(np);
    sol.clip_count = clips.load();
    return sol;
}

StrategyTerms optimal_pi_from_qhat(const CoefficientSet& coeffs, const PowerUtility& utility,
                                   const FactorState& state, const VectorXd& qhat) {
    const int m = coeffs.dims.m;
    const MatrixXd sigma = coeffs.sigma(state);
    const double inv1mg = 1.0 / (1.0 - utility.gamma);
    const VectorXd excess = coeffs.mu(state) - coeffs.r(state) * VectorXd::Ones(m);
    StrategyTerms terms;
    if (m == 1) {
        const double g = sigma.row(0).squaredNorm();
        if (!(g > 0.0)) throw SingularMatrixError("optimal_pi_from_qhat: sigma*sigma^T singular");
        terms.merton = inv1mg / g * excess;
        terms.hedging = VectorXd::Constant(1, inv1mg / g * sigma.row(0).dot(qhat));
        return terms;
    }
    const MatrixXd gram = sigma * sigma.transpose();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram);
    const double lmax = es.eigenvalues().maxCoeff();
    const double lmin = es.eigenvalues().minCoeff();
    if (!(lmin > 0.0) || lmax / lmin > kSingularConditionThreshold)
        throw SingularMatrixError("optimal_pi_from_qhat: sigma*sigma^T singular");
    Eigen::LDLT<MatrixXd> ldlt(gram);
    terms.merton = inv1mg * ldlt.solve(excess);
    terms.hedging = inv1mg * ldlt.solve(sigma * qhat);
    return terms;
}

std::vector<double> explicit_tilde_X(const PathBundle& bundle, const CoefficientSet& coeffs,
                                     const PowerUtility& utility, const QhatField& qhat,
                                     int workers) {
    const int K = bundle.grid.K;
    const std::size_t np = static_cast<std::size_t>(bundle.n_paths);
    const double dt = bundle.grid.dt();
    const double gam = utility.gamma;
    const double gt = utility.gamma_tilde();
    std::vector<double> Xt(static_cast<std::size_t>(K + 1) * np);
    const double xt0 = utility.U(utility.initial_wealth);
    parallel_for(np, workers, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) {
            double expo = 0.0;
            Xt[p] = xt0;
            for (int k = 0; k < K; ++k) {
                const FactorState s = bundle.state(k, p);
                const VectorXd q = qhat(k, p, s);
                const VectorXd theta = eval_theta(coeffs, s);
                const MatrixXd proj = eval_projection(coeffs, s);
                const VectorXd pq = proj * q;
                const double drift = gam * coeffs.r(s) +
                                     0.5 * gt * (1.0 - 2.0 * gam) / (1.0 - gam) * theta.squaredNorm() -
                                     gt * gt * theta.dot(q) -
                                     0.5 * gam / ((1.0 - gam) * (1.0 - gam)) * q.dot(pq);
                double dw_term = 0.0;
                for (int c = 0; c < bundle.N; ++c)
                    dw_term += (theta(c) + pq(c)) * bundle.dw(k, c, p);
                expo += drift * dt + gt * dw_term;
                if (expo > 700.0)
                    throw OverflowError("explicit_tilde_X: exponent overflow", expo);
                Xt[static_cast<std::size_t>(k + 1) * np + p] = xt0 * std::exp(expo);
            }
        }
    });
    return Xt;
}

std::vector<double> simulate_phat(const PathBundle& bundle, const CoefficientSet& coeffs,
                                  const PowerUtility& utility, const QhatField& qhat,
                                  double p_hat_0, int workers) {
    const int K = bundle.grid.K;
    const std::size_t np = static_cast<std::size_t>(bundle.n_paths);
    const double dt = bundle.grid.dt();
    std::vector<double> ph(static_cast<std::size_t>(K + 1) * np);
    parallel_for(np, workers, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) {
            double val = p_hat_0;
            ph[p] = val;
            for (int k = 0; k < K; ++k) {
                const FactorState s = bundle.state(k, p);
                const VectorXd q = qhat(k, p, s);
                double dw_term = 0.0;
                for (int c = 0; c < bundle.N; ++c) dw_term += q(c) * bundle.dw(k, c, p);
                val += -driver_f(coeffs, utility, s, q) * dt + dw_term;
                ph[static_cast<std::size_t>(k + 1) * np + p] = val;
            }
        }
    });
    return ph;
}

double value_at_zero(double p_hat_0, const PowerUtility& utility) {
    if (!std::isfinite(p_hat_0)) throw NonFiniteError("value_at_zero: p_hat_0 not finite");
    return std::pow(utility.initial_wealth, utility.gamma) / utility.gamma * std::exp(p_hat_0);
}

ContractionDiagnostics contraction_diagnostics(const PathBundle& bundle,
                                               const CoefficientSet& coeffs,
                                               const PowerUtility& utility, int workers) {
    const int K = bundle.grid.K;
    const std::size_t np = static_cast<std::size_t>(bundle.n_paths);
    const double dt = bundle.grid.dt();
    const double gt = utility.gamma_tilde();
    std::vector<double> xi(np, 0.0);
    parallel_for(np, workers, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) {
            double acc = 0.0;
            for (int k = 0; k < K; ++k) {
                const FactorState s = bundle.state(k, p);
                const VectorXd theta = eval_theta(coeffs, s);
                acc += (utility.gamma * coeffs.r(s) + 0.5 * gt * theta.squaredNorm()) * dt;
            }
            xi[p] = acc;
        }
    });
    // ||I + gt*proj|| equals 1 + gt at every full-rank state (proj is an
    // orthogonal projection), so a thin subsample suffices for the sup.
    double onrm = 0.0;
    const std::size_t probe_paths = std::min<std::size_t>(np, 64);
    const int probe_stride = std::max(1, K / 16);
    for (std::size_t p = 0; p < probe_paths; ++p) {
        for (int k = 0; k < K; k += probe_stride) {
            const FactorState s = bundle.state(k, p);
            const MatrixXd proj = eval_projection(coeffs, s);
            const MatrixXd I = MatrixXd::Identity(proj.rows(), proj.cols());
            Eigen::SelfAdjointEigenSolver<MatrixXd> es(I + gt * proj);
            onrm = std::max(onrm, es.eigenvalues().cwiseAbs().maxCoeff());
        }
    }
    ContractionDiagnostics d;
    double sup = 0.0;
    double mean = 0.0;
    for (std::size_t p = 0; p < np; ++p) {
        sup = std::max(sup, std::abs(xi[p]));
        mean += xi[p];
    }
    d.xi_sup = sup;
    d.xi_mean = mean / static_cast<double>(np);
    d.beta = 2.0 * onrm;
    {
        const FactorState s0 = bundle.state(0, 0);
        const MatrixXd proj = eval_projection(coeffs, s0);
        const MatrixXd I = MatrixXd::Identity(proj.rows(), proj.cols());
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(I - proj);
        d.beta_statement = 2.0 * es.eigenvalues().cwiseAbs().maxCoeff();
    }
    d.bound = 1.0 / (4.0 * d.beta);
    d.radius = 1.0 / (std::sqrt(2.0) * d.beta);
    d.smallness_holds = d.xi_sup < d.bound;
    return d;
}

}  // namespace delayfolio
