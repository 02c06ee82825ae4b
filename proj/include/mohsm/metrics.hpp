#pragma once

#include <Eigen/Core>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "mohsm/common.hpp"
#include "mohsm/types.hpp"

namespace mohsm {

/// Correlation matrix distance: 1 - Tr(K1 K2) / (|K1|_F |K2|_F).
inline double cmd(const MatrixXd& K1, const MatrixXd& K2) {
    if (K1.rows() != K1.cols() || K2.rows() != K2.cols())
        throw MetricError("cmd needs square matrices");
    if (K1.rows() != K2.rows()) throw MetricError("cmd needs matrices of the same shape");
    const double n1 = K1.norm(), n2 = K2.norm();
    if (n1 == 0.0 || n2 == 0.0) throw MetricError("cmd is undefined for a zero matrix");
    return 1.0 - (K1.cwiseProduct(K2.transpose())).sum() / (n1 * n2);
}

/// Mean absolute percentage error, in percent.
inline double mape(const VectorXd& y_true, const VectorXd& y_pred) {
    require(y_true.size() == y_pred.size(), "length mismatch");
    if (y_true.size() == 0) throw MetricError("mape of empty vectors");
    double acc = 0.0;
    for (int a = 0; a < y_true.size(); ++a) {
        if (y_true[a] == 0.0) throw MetricError("mape is undefined when y_true contains zero");
        acc += std::abs(y_true[a] - y_pred[a]) / std::abs(y_true[a]);
    }
    return 100.0 * acc / y_true.size();
}

inline double rmse(const VectorXd& y_true, const VectorXd& y_pred) {
    require(y_true.size() == y_pred.size(), "length mismatch");
    if (y_true.size() == 0) throw MetricError("rmse of empty vectors");
    return std::sqrt((y_true - y_pred).squaredNorm() / y_true.size());
}

inline double mae(const VectorXd& y_true, const VectorXd& y_pred) {
    require(y_true.size() == y_pred.size(), "length mismatch");
    if (y_true.size() == 0) throw MetricError("mae of empty vectors");
    return (y_true - y_pred).cwiseAbs().mean();
}

/// MAE normalized by the range of y_true.
inline double nmae(const VectorXd& y_true, const VectorXd& y_pred) {
    require(y_true.size() == y_pred.size(), "length mismatch");
    if (y_true.size() == 0) throw MetricError("nmae of empty vectors");
    const double range = y_true.maxCoeff() - y_true.minCoeff();
    if (range == 0.0) throw MetricError("nmae is undefined for constant y_true");
    return mae(y_true, y_pred) / range;
}

/// Average held-out Gaussian negative log density from pointwise predictions,
/// in original data units.
inline double predictive_nll(const VectorXd& y_true, const VectorXd& mean,
                             const VectorXd& variance, double noise_variance = 0.0) {
    require(y_true.size() == mean.size() && y_true.size() == variance.size(),
            "length mismatch");
    if (y_true.size() == 0) throw MetricError("predictive nll of empty vectors");
    double acc = 0.0;
    for (int a = 0; a < y_true.size(); ++a) {
        const double v = variance[a] + noise_variance;
        if (v <= 0.0) throw MetricError("nonpositive predictive variance");
        const double d = y_true[a] - mean[a];
        acc += 0.5 * (std::log(kTwoPi * v) + d * d / v);
    }
    return acc / y_true.size();
}

inline double sample_mean(const std::vector<double>& xs) {
    require(!xs.empty(), "mean of empty sample");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / xs.size();
}

/// Standard deviation with the N-1 denominator; 0 for a single sample.
inline double sample_std(const std::vector<double>& xs) {
    require(!xs.empty(), "std of empty sample");
    if (xs.size() == 1) return 0.0;
    const double m = sample_mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / (xs.size() - 1));
}

/// One aggregated metric row: per-method, per-metric, per-channel ("overall"
/// for the cross-channel aggregate), mean and std over trials.
struct MetricEntry {
    std::string method;
    std::string metric;
    std::string channel;  // channel name or "overall"
    double mean = 0.0;
    double std_dev = 0.0;
    int trials = 0;
    std::vector<double> values;  // per-trial values backing mean/std
};

struct MetricReport {
    std::vector<MetricEntry> entries;
    std::vector<std::string> failures;  // per-trial failure notes

    MetricEntry& add(const std::string& method, const std::string& metric,
                     const std::string& channel, const std::vector<double>& values) {
        MetricEntry e;
        e.method = method;
        e.metric = metric;
        e.channel = channel;
        e.values = values;
        e.trials = static_cast<int>(values.size());
        e.mean = sample_mean(values);
        e.std_dev = sample_std(values);
        entries.push_back(std::move(e));
        return entries.back();
    }

    const MetricEntry* find(const std::string& method, const std::string& metric,
                            const std::string& channel) const {
        for (const auto& e : entries)
            if (e.method == method && e.metric == metric && e.channel == channel) return &e;
        return nullptr;
    }
};

}  // namespace mohsm
