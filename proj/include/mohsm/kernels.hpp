#pragma once

#include <Eigen/Core>
#include <cmath>
#include <vector>

#include "mohsm/types.hpp"

namespace mohsm {

namespace detail {

/// alpha normalization for a cross pair. ell_ij = 0 selects the stationary
/// (MOSM) normalization; otherwise the windowed one with ell_ij^n.
inline double alpha_from(double w_ij, const VectorXd& sigma_ij, double ell_ij) {
    const int n = static_cast<int>(sigma_ij.size());
    double det_sqrt = 1.0;
    for (int k = 0; k < n; ++k) det_sqrt *= std::sqrt(sigma_ij[k]);
    if (ell_ij == 0.0) {
        return w_ij * std::pow(kTwoPi, 0.5 * n) * det_sqrt;
    }
    return w_ij * std::pow(kTwoPi, n) * det_sqrt * std::pow(ell_ij, n);
}

}  // namespace detail

/// Derived pairwise parameters between channels i and j for one component of
/// one shift group.
inline CrossParams cross_params(const KernelSpec& spec, int shift_index, int component_index,
                                int i, int j) {
    require(shift_index >= 0 && shift_index < static_cast<int>(spec.shifts.size()),
            "shift index out of range");
    const ShiftGroup& sh = spec.shifts[shift_index];
    require(component_index >= 0 && component_index < static_cast<int>(sh.components.size()),
            "component index out of range");
    require(i >= 0 && i < spec.n_channels && j >= 0 && j < spec.n_channels,
            "channel id out of range");

    const ChannelSpectralParams& a = sh.components[component_index].channels[i];
    const ChannelSpectralParams& b = sh.components[component_index].channels[j];
    const int n = spec.input_dim;
    for (int k = 0; k < n; ++k)
        require(a.sigma_diag[k] > 0.0 && b.sigma_diag[k] > 0.0, "sigma entries must be > 0");

    CrossParams cp;
    cp.sigma_ij.resize(n);
    cp.mu_ij.resize(n);
    cp.theta_ij.resize(n);
    double expo = 0.0;
    for (int k = 0; k < n; ++k) {
        const double si = a.sigma_diag[k], sj = b.sigma_diag[k];
        const double d = si + sj;
        cp.sigma_ij[k] = 2.0 * si * sj / d;
        cp.mu_ij[k] = (si * b.mu[k] + sj * a.mu[k]) / d;
        const double dmu = a.mu[k] - b.mu[k];
        expo += dmu * dmu / d;
        cp.theta_ij[k] = a.theta[k] - b.theta[k];
    }
    cp.w_ij = a.w * b.w * std::exp(-0.25 * expo);
    cp.phi_ij = a.phi - b.phi;
    const double li2 = sh.ell[i] * sh.ell[i];
    const double lj2 = sh.ell[j] * sh.ell[j];
    cp.ell_ij = (li2 + lj2 > 0.0) ? std::sqrt(2.0 * li2 * lj2 / (li2 + lj2)) : 0.0;
    cp.alpha_ij = detail::alpha_from(cp.w_ij, cp.sigma_ij, cp.ell_ij);
    return cp;
}

namespace detail {

/// One locally-stationary mixture term. tau = x - x', xbar = (x + x')/2.
/// With ell_ij = 0 the window factor is identically 1 (stationary limit).
inline double mohsm_term(const CrossParams& cp, const VectorXd& center, const VectorXd& tau,
                         const VectorXd& xbar) {
    const int n = static_cast<int>(tau.size());
    double quad = 0.0, phase = cp.phi_ij, r2 = 0.0;
    for (int k = 0; k < n; ++k) {
        const double t = tau[k] + cp.theta_ij[k];
        quad += cp.sigma_ij[k] * t * t;
        phase += t * cp.mu_ij[k];
        const double dc = xbar[k] - center[k];
        r2 += dc * dc;
    }
    const double window =
        (cp.ell_ij == 0.0) ? 1.0 : std::exp(-0.5 * cp.ell_ij * cp.ell_ij * r2);
    return cp.alpha_ij * std::exp(-0.5 * quad) * std::cos(phase) * window;
}

}  // namespace detail

/// MOHSM kernel value between channels i and j at (x, x').
inline double eval_mohsm(const KernelSpec& spec, const VectorXd& x, const VectorXd& x_prime,
                         int i, int j) {
    const VectorXd tau = x - x_prime;
    const VectorXd xbar = 0.5 * (x + x_prime);
    double sum = 0.0;
    for (int p = 0; p < static_cast<int>(spec.shifts.size()); ++p) {
        const ShiftGroup& sh = spec.shifts[p];
        for (int q = 0; q < static_cast<int>(sh.components.size()); ++q) {
            sum += detail::mohsm_term(cross_params(spec, p, q, i, j), sh.center, tau, xbar);
        }
    }
    return sum;
}

/// MOSM kernel: the same spec interpreted with all window factors fixed to 1
/// and the stationary alpha normalization, regardless of the stored ell.
inline double eval_mosm(const KernelSpec& spec, const VectorXd& x, const VectorXd& x_prime,
                        int i, int j) {
    const VectorXd tau = x - x_prime;
    const VectorXd xbar = VectorXd::Zero(spec.input_dim);
    double sum = 0.0;
    for (int p = 0; p < static_cast<int>(spec.shifts.size()); ++p) {
        const ShiftGroup& sh = spec.shifts[p];
        for (int q = 0; q < static_cast<int>(sh.components.size()); ++q) {
            CrossParams cp = cross_params(spec, p, q, i, j);
            cp.ell_ij = 0.0;
            cp.alpha_ij = detail::alpha_from(cp.w_ij, cp.sigma_ij, 0.0);
            sum += detail::mohsm_term(cp, xbar, tau, xbar);
        }
    }
    return sum;
}

/// One component of a single-output harmonizable spectral mixture kernel.
/// The window uses the time-domain lengthscale convention 1/(2 ell^2).
struct HsmComponent {
    double w = 1.0;        // magnitude, > 0
    double ell = 1.0;      // time-domain window lengthscale, > 0
    VectorXd center;       // window center c_q
    VectorXd sigma_diag;   // spectral covariance diagonal, > 0
    VectorXd mu;           // spectral mean

    void validate() const {
        require(w > 0.0, "HSM component weight must be > 0");
        require(ell > 0.0, "HSM window lengthscale must be > 0");
        for (int k = 0; k < sigma_diag.size(); ++k)
            require(sigma_diag[k] > 0.0, "HSM sigma entries must be > 0");
    }
};

struct HsmParams {
    std::vector<HsmComponent> components;

    void validate() const {
        require(!components.empty(), "HSM kernel has no components");
        for (const auto& c : components) c.validate();
    }
};

/// HSM kernel value at (x, x').
inline double eval_hsm(const HsmParams& params, const VectorXd& x, const VectorXd& x_prime) {
    params.validate();
    const VectorXd tau = x - x_prime;
    const VectorXd xbar = 0.5 * (x + x_prime);
    double sum = 0.0;
    for (const auto& c : params.components) {
        double r2 = (xbar - c.center).squaredNorm();
        double quad = 0.0, phase = 0.0;
        for (int k = 0; k < tau.size(); ++k) {
            quad += c.sigma_diag[k] * tau[k] * tau[k];
            phase += c.mu[k] * tau[k];
        }
        sum += c.w * std::exp(-r2 / (2.0 * c.ell * c.ell)) * std::exp(-0.5 * quad) *
               std::cos(phase);
    }
    return sum;
}

/// Linear model of coregionalization over latent HSM kernels:
/// k_ij = sum_q A(i,q) A(j,q) k_q(x, x').
inline double eval_lmc(const MatrixXd& mixing, const std::vector<HsmParams>& latent_kernels,
                       const VectorXd& x, const VectorXd& x_prime, int i, int j) {
    require(mixing.cols() == static_cast<Eigen::Index>(latent_kernels.size()),
            "mixing matrix columns must match latent kernel count");
    require(i >= 0 && i < mixing.rows() && j >= 0 && j < mixing.rows(),
            "channel id out of range");
    double sum = 0.0;
    for (int q = 0; q < mixing.cols(); ++q) {
        const double aij = mixing(i, q) * mixing(j, q);
        if (aij != 0.0) sum += aij * eval_hsm(latent_kernels[q], x, x_prime);
    }
    return sum;
}

}  // namespace mohsm
