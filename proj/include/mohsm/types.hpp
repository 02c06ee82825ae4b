#pragma once

#include <Eigen/Core>
#include <vector>

#include "mohsm/common.hpp"

namespace mohsm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Per-channel spectral-factor parameters of one mixture component.
/// sigma_diag holds the diagonal of the spectral covariance (already squared).
struct ChannelSpectralParams {
    double w = 1.0;        // magnitude
    VectorXd mu;           // spectral mean, rad per input unit
    VectorXd sigma_diag;   // diagonal of the spectral covariance, entries > 0
    VectorXd theta;        // time delay, input units
    double phi = 0.0;      // phase, radians

    void validate(int input_dim) const {
        require(mu.size() == input_dim && sigma_diag.size() == input_dim &&
                    theta.size() == input_dim,
                "channel params have wrong dimension");
        require(std::isfinite(w) && std::isfinite(phi), "non-finite channel parameter");
        for (int k = 0; k < input_dim; ++k) {
            require(std::isfinite(mu[k]) && std::isfinite(theta[k]),
                    "non-finite channel parameter");
            require(sigma_diag[k] > 0.0 && std::isfinite(sigma_diag[k]),
                    "sigma_diag entries must be > 0");
        }
    }
};

/// One spectral component: the per-channel parameter rows of a rank-1 factor.
struct MixtureComponent {
    std::vector<ChannelSpectralParams> channels;  // size M
};

/// One input-shift window: its center, per-channel frequency lengthscales and
/// the mixture components active in the window.
struct ShiftGroup {
    VectorXd center;              // x_p, input units
    VectorXd ell;                 // per-channel frequency lengthscale, >= 0
    std::vector<MixtureComponent> components;
};

/// Full hyperparameter set of a MOHSM (or MOSM, with all ell = 0) model.
struct KernelSpec {
    int n_channels = 0;
    int input_dim = 0;
    std::vector<ShiftGroup> shifts;
    VectorXd noise;  // per-channel observation-noise standard deviation, > 0

    void validate() const {
        require(n_channels >= 1 && input_dim >= 1, "need n_channels >= 1, input_dim >= 1");
        require(!shifts.empty(), "need at least one input shift");
        require(noise.size() == n_channels, "noise vector size mismatch");
        for (int i = 0; i < n_channels; ++i)
            require(noise[i] > 0.0 && std::isfinite(noise[i]), "noise entries must be > 0");
        for (const auto& sh : shifts) {
            require(sh.center.size() == input_dim, "shift center dimension mismatch");
            require(sh.ell.size() == n_channels, "shift ell size mismatch");
            for (int i = 0; i < n_channels; ++i)
                require(sh.ell[i] >= 0.0 && std::isfinite(sh.ell[i]), "ell entries must be >= 0");
            require(!sh.components.empty(), "shift has no components");
            for (const auto& comp : sh.components) {
                require(static_cast<int>(comp.channels.size()) == n_channels,
                        "component channel count mismatch");
                for (const auto& ch : comp.channels) ch.validate(input_dim);
            }
        }
    }
};

/// Derived pairwise parameters for one (shift, component, i, j) combination.
struct CrossParams {
    VectorXd sigma_ij;  // diagonal, > 0
    VectorXd mu_ij;
    double w_ij = 0.0;
    VectorXd theta_ij;
    double phi_ij = 0.0;
    double ell_ij = 0.0;  // >= 0
    double alpha_ij = 0.0;
};

/// One observation of one channel.
struct DataPoint {
    int channel = 0;
    VectorXd x;
    double y = 0.0;
};

/// Per-channel affine normalization y_norm = (y - mean) / scale.
struct Normalization {
    VectorXd mean;
    VectorXd scale;

    bool identity() const { return mean.size() == 0; }

    double apply(int channel, double y) const {
        return identity() ? y : (y - mean[channel]) / scale[channel];
    }
    double invert(int channel, double y_norm) const {
        return identity() ? y_norm : y_norm * scale[channel] + mean[channel];
    }
    double channel_scale(int channel) const { return identity() ? 1.0 : scale[channel]; }
};

/// Flat multi-channel dataset plus channel metadata and normalization state.
struct Dataset {
    std::vector<DataPoint> points;
    std::vector<std::string> channel_names;
    Normalization normalization;

    int n_channels() const { return static_cast<int>(channel_names.size()); }
    int size() const { return static_cast<int>(points.size()); }

    /// Computes z-score normalization statistics from this dataset's own points.
    void fit_normalization() {
        const int M = n_channels();
        normalization.mean = VectorXd::Zero(M);
        normalization.scale = VectorXd::Ones(M);
        VectorXd sum = VectorXd::Zero(M), sumsq = VectorXd::Zero(M);
        VectorXd count = VectorXd::Zero(M);
        for (const auto& p : points) {
            sum[p.channel] += p.y;
            sumsq[p.channel] += p.y * p.y;
            count[p.channel] += 1.0;
        }
        for (int i = 0; i < M; ++i) {
            if (count[i] > 0) normalization.mean[i] = sum[i] / count[i];
            if (count[i] > 1) {
                double var = sumsq[i] / count[i] - normalization.mean[i] * normalization.mean[i];
                if (var > 0) normalization.scale[i] = std::sqrt(var);
            }
        }
    }

    void validate() const {
        for (const auto& p : points) {
            require(p.channel >= 0 && p.channel < n_channels(), "channel id out of range");
            require(std::isfinite(p.y), "non-finite observation");
            for (int k = 0; k < p.x.size(); ++k)
                require(std::isfinite(p.x[k]), "non-finite input location");
        }
        if (!normalization.identity())
            for (int i = 0; i < n_channels(); ++i)
                require(normalization.scale[i] > 0.0, "normalization scale must be > 0");
    }
};

}  // namespace mohsm
