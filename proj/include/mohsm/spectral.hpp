#pragma once

#include <Eigen/Core>
#include <complex>
#include <vector>

#include "mohsm/kernels.hpp"

namespace mohsm {

using Complex = std::complex<double>;

/// Rank-1 spectral factor R_i(omega, omega'). With ell = 0 the frequency
/// correlation factor degenerates to the indicator of omega == omega'
/// (limit convention, test-only usage).
inline Complex spectral_factor(const ChannelSpectralParams& params, double ell,
                               const VectorXd& omega, const VectorXd& omega_prime) {
    const VectorXd what = omega - omega_prime;
    const VectorXd wbar = 0.5 * (omega + omega_prime);
    double corr;
    if (ell == 0.0) {
        corr = (what.squaredNorm() == 0.0) ? 1.0 : 0.0;
    } else {
        corr = std::exp(-what.squaredNorm() / (4.0 * ell * ell));
    }
    double quad = 0.0, phase = params.phi;
    for (int k = 0; k < omega.size(); ++k) {
        const double d = wbar[k] - params.mu[k];
        quad += d * d / params.sigma_diag[k];
        phase += params.theta[k] * wbar[k];
    }
    return params.w * corr * std::exp(-0.25 * quad) *
           Complex(std::cos(phase), -std::sin(phase));
}

namespace detail {

inline Complex density_raw(const CrossParams& cp, const VectorXd& center,
                           const VectorXd& omega, const VectorXd& omega_prime) {
    const VectorXd what = omega - omega_prime;
    const VectorXd wbar = 0.5 * (omega + omega_prime);
    // S_ij = conj(R_i) R_j times the input-shift factor exp(-i what^T x_p),
    // so the theta/phi phase enters with a positive sign.
    double quad = 0.0, phase = -cp.phi_ij;
    for (int k = 0; k < omega.size(); ++k) {
        const double d = wbar[k] - cp.mu_ij[k];
        quad += d * d / cp.sigma_ij[k];
        phase -= cp.theta_ij[k] * wbar[k];
        phase += what[k] * center[k];
    }
    const double mag = cp.w_ij *
                       std::exp(-what.squaredNorm() / (2.0 * cp.ell_ij * cp.ell_ij)) *
                       std::exp(-0.5 * quad);
    return mag * Complex(std::cos(phase), -std::sin(phase));
}

}  // namespace detail

/// Generalized cross-spectral density of one component. The symmetrized form
/// is the Hermitian reflection (S(w,w') + conj(S(-w,-w'))) / 2, which is the
/// reality condition making the time-domain kernel real-valued.
inline Complex spectral_density(const KernelSpec& spec, int shift_index, int component_index,
                                int i, int j, const VectorXd& omega,
                                const VectorXd& omega_prime, bool symmetrized) {
    const CrossParams cp = cross_params(spec, shift_index, component_index, i, j);
    require(cp.ell_ij > 0.0,
            "spectral density does not exist as a function for ell = 0 (stationary limit)");
    const VectorXd& center = spec.shifts[shift_index].center;
    const Complex s = detail::density_raw(cp, center, omega, omega_prime);
    if (!symmetrized) return s;
    return 0.5 * (s + std::conj(detail::density_raw(cp, center, -omega, -omega_prime)));
}

/// Quadrature settings for the transform oracle.
struct QuadratureSpec {
    int nodes_per_axis = 800;  // at least 400
    double pad_sigmas = 5.0;   // grid half-width beyond the outermost peak
    double range_factor = 1.0; // multiplies the grid half-width (tail checks)
};

namespace detail {

inline VectorXd oracle_grid_nodes(const KernelSpec& spec, int i, int j,
                                  const QuadratureSpec& quad) {
    require(spec.input_dim == 1, "the transform oracle is 1-D by design");
    require(quad.nodes_per_axis >= 400, "need at least 400 quadrature nodes per axis");
    double peak = 0.0, sig = 0.0, ell = 0.0;
    for (int p = 0; p < static_cast<int>(spec.shifts.size()); ++p) {
        for (int q = 0; q < static_cast<int>(spec.shifts[p].components.size()); ++q) {
            const CrossParams cp = cross_params(spec, p, q, i, j);
            require(cp.ell_ij > 0.0, "oracle requires ell > 0 everywhere");
            peak = std::max(peak, std::abs(cp.mu_ij[0]));
            sig = std::max(sig, std::sqrt(cp.sigma_ij[0]));
            ell = std::max(ell, cp.ell_ij);
        }
    }
    // Symmetric grid: the symmetrized density has mirrored peaks at -mu.
    const double hi = (peak + quad.pad_sigmas * (sig + ell)) * quad.range_factor;
    return VectorXd::LinSpaced(quad.nodes_per_axis, -hi, hi);
}

}  // namespace detail

/// Numeric inverse generalized Fourier transform of the full symmetrized
/// density, Re of a trapezoidal tensor quadrature, evaluated on a grid of
/// (x, x') pairs at once. Verification oracle for eval_mohsm.
inline MatrixXd spectral_transform_oracle_grid(const KernelSpec& spec, int i, int j,
                                               const VectorXd& xs, const VectorXd& xps,
                                               const QuadratureSpec& quad = {}) {
    const VectorXd nodes = detail::oracle_grid_nodes(spec, i, j, quad);
    const int G = static_cast<int>(nodes.size());
    const double h = nodes[1] - nodes[0];

    Eigen::MatrixXcd S = Eigen::MatrixXcd::Zero(G, G);
    VectorXd wk(1), wl(1);
    for (int p = 0; p < static_cast<int>(spec.shifts.size()); ++p) {
        const VectorXd& center = spec.shifts[p].center;
        for (int q = 0; q < static_cast<int>(spec.shifts[p].components.size()); ++q) {
            const CrossParams cp = cross_params(spec, p, q, i, j);
            for (int a = 0; a < G; ++a) {
                wk[0] = nodes[a];
                for (int b = 0; b < G; ++b) {
                    wl[0] = nodes[b];
                    const Complex s = detail::density_raw(cp, center, wk, wl);
                    const Complex sm = detail::density_raw(cp, center, -wk, -wl);
                    S(a, b) += 0.5 * (s + std::conj(sm));
                }
            }
        }
    }

    // Trapezoid weights on both axes.
    VectorXd tw = VectorXd::Constant(G, h);
    tw[0] = tw[G - 1] = 0.5 * h;

    // exp(i(omega x - omega' x')) is separable in (omega, omega').
    Eigen::MatrixXcd U(G, static_cast<int>(xs.size()));
    Eigen::MatrixXcd V(G, static_cast<int>(xps.size()));
    for (int a = 0; a < G; ++a) {
        for (int c = 0; c < xs.size(); ++c)
            U(a, c) = tw[a] * Complex(std::cos(nodes[a] * xs[c]), std::sin(nodes[a] * xs[c]));
        for (int c = 0; c < xps.size(); ++c)
            V(a, c) = tw[a] * Complex(std::cos(nodes[a] * xps[c]), -std::sin(nodes[a] * xps[c]));
    }
    return (U.transpose() * S * V).real();
}

/// Single-point oracle value.
inline double spectral_transform_oracle(const KernelSpec& spec, int i, int j, double x,
                                        double x_prime, const QuadratureSpec& quad = {}) {
    VectorXd xs(1), xps(1);
    xs[0] = x;
    xps[0] = x_prime;
    return spectral_transform_oracle_grid(spec, i, j, xs, xps, quad)(0, 0);
}

}  // namespace mohsm
