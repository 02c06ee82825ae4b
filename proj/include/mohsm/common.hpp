#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mohsm {

struct InvalidParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct FactorizationError : std::runtime_error {
    double min_eigenvalue_estimate;
    FactorizationError(const std::string& msg, double min_eig)
        : std::runtime_error(msg), min_eigenvalue_estimate(min_eig) {}
};

struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

/// Numerically stable log(1 + exp(x)).
inline double softplus(double x) {
    if (x > 30.0) return x;
    if (x < -700.0) return 0.0;
    return std::log1p(std::exp(x));
}

/// Inverse of softplus; clamps y = 0 to the most negative representable preimage.
inline double softplus_inv(double y) {
    if (y > 30.0) return y;
    if (y <= 0.0) return -745.0;
    double x = std::log(std::expm1(y));
    return x < -745.0 ? -745.0 : x;
}

/// d softplus / dx = sigmoid(x).
inline double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InvalidParameterError(msg);
}

}  // namespace mohsm
