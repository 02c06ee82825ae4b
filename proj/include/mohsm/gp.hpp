#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <random>
#include <vector>

#include "mohsm/models.hpp"
#include "mohsm/types.hpp"

namespace mohsm {

/// A (channel, location) pair used for Gram assembly and queries.
struct InputPoint {
    int channel = 0;
    VectorXd x;
};

inline std::vector<InputPoint> inputs_of(const Dataset& data) {
    std::vector<InputPoint> out;
    out.reserve(data.points.size());
    for (const auto& p : data.points) out.push_back({p.channel, p.x});
    return out;
}

/// Kernel-only multi-output Gram matrix; symmetric when rows == cols.
inline MatrixXd build_gram(const KernelModel& model, const std::vector<InputPoint>& rows,
                           const std::vector<InputPoint>& cols) {
    const int R = static_cast<int>(rows.size());
    const int C = static_cast<int>(cols.size());
    MatrixXd K(R, C);
    const bool square = (&rows == &cols);
    for (int a = 0; a < R; ++a) {
        const int b0 = square ? a : 0;
        for (int b = b0; b < C; ++b) {
            K(a, b) = model.eval(rows[a].channel, cols[b].channel, rows[a].x, cols[b].x);
            if (square && b != a) K(b, a) = K(a, b);
        }
    }
    return K;
}

/// Lower-triangular factor of gram + diag(noise^2 + jitter).
struct CholFactor {
    MatrixXd lower;
    double log_det = 0.0;
    double jitter_used = 0.0;
};

/// Cholesky with an escalating jitter ladder: first attempt without jitter,
/// then 1e-10 * trace/N * 10^k for k = 0..6.
inline CholFactor factorize(const MatrixXd& gram, const VectorXd& noise_diag) {
    require(gram.rows() == gram.cols(), "gram must be square");
    require(noise_diag.size() == gram.rows(), "noise diagonal size mismatch");
    const int N = static_cast<int>(gram.rows());
    MatrixXd Ky = gram;
    for (int a = 0; a < N; ++a) Ky(a, a) += noise_diag[a] * noise_diag[a];

    const double base = 1e-10 * Ky.trace() / N;
    for (int attempt = -1; attempt <= 6; ++attempt) {
        const double jitter = (attempt < 0) ? 0.0 : base * std::pow(10.0, attempt);
        MatrixXd J = Ky;
        if (jitter > 0.0) J.diagonal().array() += jitter;
        Eigen::LLT<MatrixXd> llt(J);
        if (llt.info() == Eigen::Success) {
            CholFactor f;
            f.lower = llt.matrixL();
            f.log_det = 2.0 * f.lower.diagonal().array().log().sum();
            f.jitter_used = jitter;
            if (std::isfinite(f.log_det)) return f;
        }
    }
    const double min_eig = Eigen::SelfAdjointEigenSolver<MatrixXd>(Ky).eigenvalues().minCoeff();
    throw FactorizationError("matrix not positive definite after maximum jitter", min_eig);
}

inline VectorXd normalized_targets(const Dataset& data) {
    VectorXd y(data.size());
    for (int a = 0; a < data.size(); ++a)
        y[a] = data.normalization.apply(data.points[a].channel, data.points[a].y);
    return y;
}

inline VectorXd noise_diag_for(const KernelModel& model, const std::vector<InputPoint>& inputs) {
    VectorXd nd(inputs.size());
    for (size_t a = 0; a < inputs.size(); ++a)
        nd[a] = model.noise_sigma(inputs[a].channel);
    return nd;
}

/// Exact negative log marginal likelihood of the zero-mean multi-output GP
/// on the dataset's normalized targets.
inline double nll(const KernelModel& model, const Dataset& data) {
    require(data.size() > 0, "empty dataset");
    const auto inputs = inputs_of(data);
    const MatrixXd K = build_gram(model, inputs, inputs);
    const CholFactor f = factorize(K, noise_diag_for(model, inputs));
    const VectorXd y = normalized_targets(data);
    const VectorXd alpha = f.lower.triangularView<Eigen::Lower>().solve(y);
    const int N = data.size();
    return 0.5 * alpha.squaredNorm() + 0.5 * f.log_det + 0.5 * N * std::log(kTwoPi);
}

/// Posterior mean and variance per query point, in original data units.
struct PosteriorResult {
    VectorXd mean;
    VectorXd variance;
    MatrixXd covariance;       // filled only when full_cov was requested
    int clamped_variances = 0; // negative variances clamped to 0
};

inline PosteriorResult posterior(const KernelModel& model, const Dataset& data,
                                 const std::vector<InputPoint>& queries, bool full_cov = false) {
    require(!queries.empty(), "no query points");
    require(data.size() > 0, "empty dataset");
    const auto inputs = inputs_of(data);
    const MatrixXd K = build_gram(model, inputs, inputs);
    const CholFactor f = factorize(K, noise_diag_for(model, inputs));
    const VectorXd y = normalized_targets(data);

    const auto L = f.lower.triangularView<Eigen::Lower>();
    const VectorXd alpha0 = L.solve(y);
    VectorXd alpha = alpha0;
    f.lower.transpose().triangularView<Eigen::Upper>().solveInPlace(alpha);

    const MatrixXd Ks = build_gram(model, inputs, queries);  // N x Nq
    const MatrixXd V = L.solve(Ks);                          // L^-1 Ks

    PosteriorResult res;
    const int Nq = static_cast<int>(queries.size());
    res.mean.resize(Nq);
    res.variance.resize(Nq);
    const VectorXd mean_norm = Ks.transpose() * alpha;
    for (int q = 0; q < Nq; ++q) {
        const int ch = queries[q].channel;
        res.mean[q] = data.normalization.invert(ch, mean_norm[q]);
        double var = model.eval(ch, ch, queries[q].x, queries[q].x) - V.col(q).squaredNorm();
        if (var < 0.0) {
            var = 0.0;
            ++res.clamped_variances;
        }
        const double s = data.normalization.channel_scale(ch);
        res.variance[q] = var * s * s;
    }
    if (full_cov) {
        const MatrixXd Kss = build_gram(model, queries, queries);
        res.covariance = Kss - V.transpose() * V;
        for (int a = 0; a < Nq; ++a) {
            const double sa = data.normalization.channel_scale(queries[a].channel);
            for (int b = 0; b < Nq; ++b)
                res.covariance(a, b) *= sa * data.normalization.channel_scale(queries[b].channel);
        }
    }
    return res;
}

/// Draw from N(0, K + 1e-8 I) for an explicit covariance matrix.
inline VectorXd sample_gaussian(const MatrixXd& K, std::uint64_t seed) {
    const VectorXd jitter_noise = VectorXd::Constant(K.rows(), 1e-4);  // squared -> 1e-8
    const CholFactor f = factorize(K, jitter_noise);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    VectorXd z(K.rows());
    for (int a = 0; a < z.size(); ++a) z[a] = gauss(rng);
    return f.lower.triangularView<Eigen::Lower>() * z;
}

/// Draw from N(0, K + 1e-8 I); deterministic in the seed.
inline VectorXd sample_prior(const KernelModel& model, const std::vector<InputPoint>& inputs,
                             std::uint64_t seed) {
    return sample_gaussian(build_gram(model, inputs, inputs), seed);
}

}  // namespace mohsm
