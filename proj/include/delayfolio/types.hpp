#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace delayfolio {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Base for every failure the library raises on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad user input (config file, invalid parameter combination).
struct ConfigError : Error {
    using Error::Error;
};

// Failure detected while computing (singular matrices, blow-ups, ...).
struct NumericError : Error {
    using Error::Error;
};

struct SingularMatrixError : NumericError {
    using NumericError::NumericError;
};

struct BlowUpError : NumericError {
    double blow_up_time = 0.0;
    BlowUpError(const std::string& msg, double t) : NumericError(msg), blow_up_time(t) {}
};

struct OverflowError : NumericError {
    double max_exponent = 0.0;
    OverflowError(const std::string& msg, double e) : NumericError(msg), max_exponent(e) {}
};

struct NonFiniteError : NumericError {
    using NumericError::NumericError;
};

struct MissingHistoryError : ConfigError {
    using ConfigError::ConfigError;
};

struct RegressionRankError : NumericError {
    int step = -1;
    RegressionRankError(const std::string& msg, int k) : NumericError(msg), step(k) {}
};

// m risky assets, n factors, N Brownian drivers.
struct ModelDims {
    int m = 1;
    int n = 1;
    int N = 1;

    void validate() const {
        if (m < 1 || N < 1 || m > N) throw ConfigError("dims: need 1 <= m <= N");
        if (n < 1) throw ConfigError("dims: need n >= 1");
    }
    bool complete() const { return m == N; }
};

// Point value of the factor triple (Y, V, Z).
struct FactorState {
    VectorXd y;  // n
    double v = 0.0;
    VectorXd z;  // n
};

// Optimal strategies split into the myopic (Merton) part and the
// factor-hedging part driven by the BSDE control.
struct StrategyTerms {
    VectorXd merton;
    VectorXd hedging;
    VectorXd total() const { return merton + hedging; }
};

}  // namespace delayfolio
