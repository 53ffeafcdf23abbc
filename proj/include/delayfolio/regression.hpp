#pragma once

#include <vector>

#include "delayfolio/types.hpp"

namespace delayfolio {

struct BasisSpec {
    int degree = 2;
    bool cross_terms = true;  // false keeps only pure powers

    void validate() const {
        if (degree < 0 || degree > 6) throw ConfigError("basis: degree must be in [0, 6]");
    }
};

// Multivariate polynomial terms of total degree <= degree over n_vars
// standardized variables. Term 0 is the constant.
struct PolyBasis {
    int n_vars = 0;
    BasisSpec spec;
    std::vector<std::vector<int>> exps;  // term -> exponent per variable

    static PolyBasis make(int n_vars, const BasisSpec& spec);
    int n_terms() const { return static_cast<int>(exps.size()); }
};

// Per-step least-squares fit over the polynomial basis of standardized raw
// variables. Raw variables without cross-path variation are dropped (their
// terms fold into the constant), which keeps the Gram matrix well posed at
// degenerate steps such as t = 0.
class StepRegression {
  public:
    StepRegression(const PolyBasis& basis, std::size_t n_paths, int step_index);

    // raw variable column j, length n_paths; kept as a pointer, not copied
    void set_var(int j, const double* data);

    // standardize, build the design matrix and factor the Gram matrix;
    // throws RegressionRankError when active terms are linearly dependent
    void build(int workers);

    // least-squares coefficients for one target column (length n_paths)
    VectorXd fit(const double* target) const;

    // in-sample predictions for a coefficient vector
    void predict(const VectorXd& coef, double* out, int workers) const;

    // prediction at an arbitrary raw-variable point
    double predict_at(const VectorXd& coef, const VectorXd& raw) const;

    // OLS standard errors: sqrt(s^2 diag((Phi^T Phi)^{-1})), zero for inactive terms
    VectorXd coef_se(const double* target, const VectorXd& coef) const;

    const VectorXd& means() const { return mean_; }
    const VectorXd& scales() const { return scale_; }  // 0 marks a dropped variable
    int n_terms() const { return basis_.n_terms(); }

  private:
    PolyBasis basis_;
    std::size_t n_paths_;
    int step_;
    std::vector<const double*> vars_;
    VectorXd mean_, scale_;
    std::vector<char> term_active_;
    MatrixXd phi_;  // n_paths x n_terms, inactive terms zeroed
    Eigen::LDLT<MatrixXd> gram_ldlt_;
    bool built_ = false;

    void fill_row(std::size_t p, double* row) const;
};

}  // namespace delayfolio
