#pragma once

#include <random>

#include "mohsm/types.hpp"

namespace testutil {

using mohsm::ChannelSpectralParams;
using mohsm::KernelSpec;
using mohsm::MixtureComponent;
using mohsm::ShiftGroup;
using mohsm::VectorXd;

inline double uni(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline VectorXd uni_vec(std::mt19937_64& rng, int n, double lo, double hi) {
    VectorXd v(n);
    for (int k = 0; k < n; ++k) v[k] = uni(rng, lo, hi);
    return v;
}

struct SpecOptions {
    int n_channels = 2;
    int input_dim = 1;
    int P = 1;
    int Q = 1;
    double ell_lo = 0.3;
    double ell_hi = 0.6;  // set both to 0 for a stationary spec
    // Restrict draws to the slice where the windowed kernel is exactly PSD:
    // mu, sigma, theta shared across channels; w and phi free. With ell = 0
    // (stationary) full heterogeneity is PSD and this flag has no effect.
    bool psd_safe = false;
};

inline KernelSpec random_spec(std::mt19937_64& rng, const SpecOptions& o = {}) {
    KernelSpec spec;
    spec.n_channels = o.n_channels;
    spec.input_dim = o.input_dim;
    spec.noise = uni_vec(rng, o.n_channels, 0.05, 0.3);
    const bool windowed = o.ell_hi > 0.0;
    for (int p = 0; p < o.P; ++p) {
        ShiftGroup sh;
        sh.center = uni_vec(rng, o.input_dim, -2.0, 2.0);
        sh.ell = windowed ? VectorXd::Constant(o.n_channels, uni(rng, o.ell_lo, o.ell_hi))
                          : VectorXd::Zero(o.n_channels);
        for (int q = 0; q < o.Q; ++q) {
            MixtureComponent comp;
            const VectorXd shared_mu = uni_vec(rng, o.input_dim, 0.5, 3.0);
            const VectorXd shared_sigma = uni_vec(rng, o.input_dim, 0.3, 1.5);
            for (int i = 0; i < o.n_channels; ++i) {
                ChannelSpectralParams ch;
                ch.w = uni(rng, 0.5, 1.5);
                const bool tie = o.psd_safe && windowed;
                ch.mu = tie ? shared_mu : uni_vec(rng, o.input_dim, 0.5, 3.0);
                ch.sigma_diag = tie ? shared_sigma : uni_vec(rng, o.input_dim, 0.3, 1.5);
                ch.theta = tie ? VectorXd::Zero(o.input_dim)
                               : uni_vec(rng, o.input_dim, -0.5, 0.5);
                ch.phi = uni(rng, -1.2, 1.2);
                comp.channels.push_back(std::move(ch));
            }
            sh.components.push_back(std::move(comp));
        }
        spec.shifts.push_back(std::move(sh));
    }
    return spec;
}

}  // namespace testutil
