#include "delayfolio/regression.hpp"

#include <cmath>

#include "delayfolio/parallel.hpp"

namespace delayfolio {

PolyBasis PolyBasis::make(int n_vars, const BasisSpec& spec) {
    spec.validate();
    PolyBasis b;
    b.n_vars = n_vars;
    b.spec = spec;
    std::vector<int> cur(n_vars, 0);
    // enumerate exponent tuples with total degree <= spec.degree, constant first
    std::function<void(int, int)> rec = [&](int var, int remaining) {
        if (var == n_vars) {
            b.exps.push_back(cur);
            return;
        }
        for (int e = 0; e <= remaining; ++e) {
            cur[var] = e;
            rec(var + 1, remaining - e);
        }
        cur[var] = 0;
    };
    rec(0, spec.degree);
    // order by total degree so the constant term comes first
    std::stable_sort(b.exps.begin(), b.exps.end(), [](const auto& a, const auto& c) {
        int sa = 0, sc = 0;
        for (int e : a) sa += e;
        for (int e : c) sc += e;
        return sa < sc;
    });
    if (!spec.cross_terms) {
        std::vector<std::vector<int>> pruned;
        for (auto& t : b.exps) {
            int nz = 0;
            for (int e : t)
                if (e > 0) ++nz;
            if (nz <= 1) pruned.push_back(t);
        }
        b.exps = std::move(pruned);
    }
    return b;
}

StepRegression::StepRegression(const PolyBasis& basis, std::size_t n_paths, int step_index)
    : basis_(basis), n_paths_(n_paths), step_(step_index), vars_(basis.n_vars, nullptr) {}

void StepRegression::set_var(int j, const double* data) { vars_.at(j) = data; }

void StepRegression::fill_row(std::size_t p, double* row) const {
    const int nv = basis_.n_vars;
    const int nt = basis_.n_terms();
    double std_vals[16];
    for (int j = 0; j < nv; ++j)
        std_vals[j] = scale_(j) > 0.0 ? (vars_[j][p] - mean_(j)) / scale_(j) : 0.0;
    for (int t = 0; t < nt; ++t) {
        if (!term_active_[t]) {
            row[t] = 0.0;
            continue;
        }
        double val = 1.0;
        for (int j = 0; j < nv; ++j) {
            const int e = basis_.exps[t][j];
            for (int q = 0; q < e; ++q) val *= std_vals[j];
        }
        row[t] = val;
    }
}

void StepRegression::build(int workers) {
    const int nv = basis_.n_vars;
    if (nv > 16) throw ConfigError("basis: at most 16 raw variables supported");
    for (int j = 0; j < nv; ++j)
        if (vars_[j] == nullptr) throw Error("regression: variable column not set");
    mean_.resize(nv);
    scale_.resize(nv);
    for (int j = 0; j < nv; ++j) {
        double s = 0.0;
        for (std::size_t p = 0; p < n_paths_; ++p) s += vars_[j][p];
        const double mu = s / static_cast<double>(n_paths_);
        double ss = 0.0;
        for (std::size_t p = 0; p < n_paths_; ++p) {
            const double d = vars_[j][p] - mu;
            ss += d * d;
        }
        const double sd = std::sqrt(ss / static_cast<double>(n_paths_));
        mean_(j) = mu;
        scale_(j) = sd > 1e-12 * (1.0 + std::abs(mu)) ? sd : 0.0;
    }
    const int nt = basis_.n_terms();
    term_active_.assign(nt, 1);
    for (int t = 0; t < nt; ++t)
        for (int j = 0; j < nv; ++j)
            if (basis_.exps[t][j] > 0 && scale_(j) == 0.0) term_active_[t] = 0;

    phi_.resize(n_paths_, nt);
    parallel_for(n_paths_, workers, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> row(nt);
        for (std::size_t p = lo; p < hi; ++p) {
            fill_row(p, row.data());
            for (int t = 0; t < nt; ++t) phi_(p, t) = row[t];
        }
    });

    MatrixXd gram = phi_.transpose() * phi_;
    // inactive terms get a unit diagonal so the factorization stays valid
    for (int t = 0; t < nt; ++t)
        if (!term_active_[t]) gram(t, t) = 1.0;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram);
    const double lmax = es.eigenvalues().maxCoeff();
    const double lmin = es.eigenvalues().minCoeff();
    if (!(lmin > lmax * 1e-13))
        throw RegressionRankError("regression: rank-deficient design matrix at step " +
                                      std::to_string(step_),
                                  step_);
    gram_ldlt_.compute(gram);
    built_ = true;
}

VectorXd StepRegression::fit(const double* target) const {
    if (!built_) throw Error("regression: fit before build");
    Eigen::Map<const VectorXd> y(target, static_cast<Eigen::Index>(n_paths_));
    VectorXd rhs = phi_.transpose() * y;
    for (int t = 0; t < basis_.n_terms(); ++t)
        if (!term_active_[t]) rhs(t) = 0.0;
    return gram_ldlt_.solve(rhs);
}

void StepRegression::predict(const VectorXd& coef, double* out, int workers) const {
    if (!built_) throw Error("regression: predict before build");
    parallel_for(n_paths_, workers, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) out[p] = phi_.row(p).dot(coef);
    });
}

VectorXd StepRegression::coef_se(const double* target, const VectorXd& coef) const {
    if (!built_) throw Error("regression: coef_se before build");
    const int nt = basis_.n_terms();
    double rss = 0.0;
    for (std::size_t p = 0; p < n_paths_; ++p) {
        const double e = target[p] - phi_.row(p).dot(coef);
        rss += e * e;
    }
    int active = 0;
    for (int t = 0; t < nt; ++t) active += term_active_[t] ? 1 : 0;
    const double s2 = rss / std::max<double>(1.0, static_cast<double>(n_paths_) - active);
    const MatrixXd ginv = gram_ldlt_.solve(MatrixXd::Identity(nt, nt));
    VectorXd se(nt);
    for (int t = 0; t < nt; ++t)
        se(t) = term_active_[t] ? std::sqrt(std::max(0.0, s2 * ginv(t, t))) : 0.0;
    return se;
}

double StepRegression::predict_at(const VectorXd& coef, const VectorXd& raw) const {
    const int nv = basis_.n_vars;
    const int nt = basis_.n_terms();
    double std_vals[16];
    for (int j = 0; j < nv; ++j)
        std_vals[j] = scale_(j) > 0.0 ? (raw(j) - mean_(j)) / scale_(j) : 0.0;
    double acc = 0.0;
    for (int t = 0; t < nt; ++t) {
        if (!term_active_[t]) continue;
        double val = 1.0;
        for (int j = 0; j < nv; ++j)
            for (int q = 0; q < basis_.exps[t][j]; ++q) val *= std_vals[j];
        acc += coef(t) * val;
    }
    return acc;
}

}  // namespace delayfolio
