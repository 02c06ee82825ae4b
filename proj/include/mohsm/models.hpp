#pragma once

#include <Eigen/Core>
#include <memory>
#include <string>
#include <vector>

#include "mohsm/kernels.hpp"

namespace mohsm {

/// A multi-output kernel plus per-channel noise, exposed through a bijective
/// packing onto an unconstrained parameter vector. Gradients are accumulated
/// entrywise: accumulate_entry_grad adds wgt * d k_ij(x,x') / d v into g.
class KernelModel {
public:
    virtual ~KernelModel() = default;

    virtual std::string method() const = 0;
    virtual int n_channels() const = 0;
    virtual int input_dim() const = 0;

    virtual double eval(int i, int j, const VectorXd& x, const VectorXd& x_prime) const = 0;
    virtual double noise_sigma(int i) const = 0;

    virtual int param_count() const = 0;
    virtual VectorXd pack() const = 0;
    virtual void unpack(const VectorXd& v) = 0;

    virtual void accumulate_entry_grad(int i, int j, const VectorXd& x, const VectorXd& x_prime,
                                       double wgt, VectorXd& g) const = 0;
    /// Adds wgt * d(noise_sigma(i)^2)/dv into g.
    virtual void accumulate_noise_grad(int i, double wgt, VectorXd& g) const = 0;

    virtual std::unique_ptr<KernelModel> clone() const = 0;
};

/// MOHSM model; with stationary = true the same parametrization is evaluated
/// as a MOSM (no window, stationary alpha, centers and ell excluded from the
/// packed vector). The window lengthscale is one trainable parameter per
/// shift, shared across channels: heterogeneous per-channel lengthscales make
/// the closed-form kernel indefinite, so the trainable family stays on the
/// shared-ell slice.
class MohsmModel final : public KernelModel {
public:
    explicit MohsmModel(KernelSpec spec, bool stationary = false)
        : spec_(std::move(spec)), stationary_(stationary) {
        spec_.validate();
        build_layout();
        raw_ = pack_from_spec();
        rebuild();
    }

    std::string method() const override { return stationary_ ? "mosm" : "mohsm"; }
    int n_channels() const override { return spec_.n_channels; }
    int input_dim() const override { return spec_.input_dim; }
    bool stationary() const { return stationary_; }
    const KernelSpec& spec() const { return spec_; }

    double eval(int i, int j, const VectorXd& x, const VectorXd& x_prime) const override {
        const VectorXd tau = x - x_prime;
        const VectorXd xbar = 0.5 * (x + x_prime);
        double sum = 0.0;
        for (const Term& t : pair_terms_[i * spec_.n_channels + j])
            sum += term_value(t, tau, xbar);
        return sum;
    }

    double noise_sigma(int i) const override { return spec_.noise[i]; }

    int param_count() const override { return n_params_; }
    VectorXd pack() const override { return raw_; }

    void unpack(const VectorXd& v) override {
        require(v.size() == n_params_, "packed vector size mismatch");
        raw_ = v;
        int c = 0;
        const int M = spec_.n_channels, n = spec_.input_dim;
        for (auto& sh : spec_.shifts) {
            if (!stationary_) {
                for (int k = 0; k < n; ++k) sh.center[k] = v[c++];
                sh.ell.setConstant(softplus(v[c++]));
            }
            for (auto& comp : sh.components) {
                for (auto& ch : comp.channels) {
                    ch.w = softplus(v[c++]);
                    for (int k = 0; k < n; ++k) ch.mu[k] = v[c++];
                    for (int k = 0; k < n; ++k) ch.sigma_diag[k] = softplus(v[c++]);
                    for (int k = 0; k < n; ++k) ch.theta[k] = v[c++];
                    ch.phi = v[c++];
                }
            }
        }
        for (int i = 0; i < M; ++i) spec_.noise[i] = softplus(v[c++]);
        rebuild();
    }

    void accumulate_entry_grad(int i, int j, const VectorXd& x, const VectorXd& x_prime,
                               double wgt, VectorXd& g) const override {
        const VectorXd tau = x - x_prime;
        const VectorXd xbar = 0.5 * (x + x_prime);
        const int n = spec_.input_dim;
        for (const Term& t : pair_terms_[i * spec_.n_channels + j]) {
            if (t.alpha == 0.0) continue;
            const VectorXd& cen = spec_.shifts[t.shift].center;
            double quad = 0.0, psi = t.ph, r2 = 0.0;
            for (int k = 0; k < n; ++k) {
                const double tk = tau[k] + t.th[k];
                tbuf_[k] = tk;
                quad += t.S[k] * tk * tk;
                psi += tk * t.m[k];
                if (t.windowed) {
                    const double dc = xbar[k] - cen[k];
                    r2 += dc * dc;
                }
            }
            const double A = std::exp(-0.5 * quad);
            const double c = std::cos(psi), sn = std::sin(psi);
            const double Wd = t.windowed ? std::exp(-0.5 * t.L2 * r2) : 1.0;
            const double base = t.alpha * A * Wd;  // val without the cosine
            const double val = base * c;

            auto add = [&](int idx, double dval) { g[idx] += wgt * dval * dcon_[idx]; };

            add(t.idx_wi, t.beta * A * c * Wd * t.dwij_dwi);
            add(t.idx_wj, t.beta * A * c * Wd * t.dwij_dwj);
            const double dk_dwij_rel = val;  // val * dlog(w_ij); chained below
            add(t.idx_phi, -base * sn);
            add(t.idx_phj, base * sn);
            for (int k = 0; k < n; ++k) {
                const double tk = tbuf_[k];
                const double dk_dS = val * (0.5 / t.S[k] - 0.5 * tk * tk);
                const double dk_dm = -base * sn * tk;
                const double dk_dt = -val * t.S[k] * tk - base * sn * t.m[k];
                add(t.idx_si + k, dk_dS * t.dS_dsi[k] + dk_dm * t.dm_dsi[k] +
                                      dk_dwij_rel * t.dlogw_dsi[k]);
                add(t.idx_sj + k, dk_dS * t.dS_dsj[k] + dk_dm * t.dm_dsj[k] +
                                      dk_dwij_rel * t.dlogw_dsj[k]);
                add(t.idx_mui + k, dk_dm * t.dm_dmui[k] + dk_dwij_rel * t.dlogw_dmui[k]);
                add(t.idx_muj + k, dk_dm * t.dm_dmuj[k] - dk_dwij_rel * t.dlogw_dmui[k]);
                add(t.idx_thi + k, dk_dt);
                add(t.idx_thj + k, -dk_dt);
            }
            if (t.windowed && t.L2 > 0.0) {
                const double dk_dL2 = val * (0.5 * n / t.L2 - 0.5 * r2);
                add(t.idx_elli, dk_dL2 * t.dL2_dli);
                add(t.idx_ellj, dk_dL2 * t.dL2_dlj);
                for (int k = 0; k < n; ++k)
                    add(t.idx_center + k, val * t.L2 * (xbar[k] - cen[k]));
            }
        }
    }

    void accumulate_noise_grad(int i, double wgt, VectorXd& g) const override {
        const int idx = idx_noise_ + i;
        g[idx] += wgt * 2.0 * spec_.noise[i] * dcon_[idx];
    }

    std::unique_ptr<KernelModel> clone() const override {
        return std::make_unique<MohsmModel>(*this);
    }

private:
    struct Term {
        // pair-level derived parameters
        VectorXd S, m, th;
        double ph = 0.0, L2 = 0.0, alpha = 0.0, beta = 0.0;
        bool windowed = false;
        int shift = 0;  // index into spec_.shifts for the window center
        // x-independent jacobian blocks
        VectorXd dS_dsi, dS_dsj, dm_dmui, dm_dmuj, dm_dsi, dm_dsj;
        VectorXd dlogw_dmui, dlogw_dsi, dlogw_dsj;
        double dwij_dwi = 0.0, dwij_dwj = 0.0;
        double dL2_dli = 0.0, dL2_dlj = 0.0;
        // packed indices
        int idx_wi = 0, idx_wj = 0, idx_mui = 0, idx_muj = 0, idx_si = 0, idx_sj = 0;
        int idx_thi = 0, idx_thj = 0, idx_phi = 0, idx_phj = 0;
        int idx_elli = 0, idx_ellj = 0, idx_center = 0;
    };

    void build_layout() {
        const int M = spec_.n_channels, n = spec_.input_dim;
        int c = 0;
        idx_center_.clear();
        idx_ell_.clear();
        idx_channel_.clear();
        for (const auto& sh : spec_.shifts) {
            if (!stationary_) {
                idx_center_.push_back(c);
                c += n;
                idx_ell_.push_back(c);
                c += 1;
            } else {
                idx_center_.push_back(-1);
                idx_ell_.push_back(-1);
            }
            std::vector<int> per_comp;
            for (size_t q = 0; q < sh.components.size(); ++q) {
                per_comp.push_back(c);
                c += M * (2 + 3 * n);  // w, mu(n), sigma(n), theta(n), phi per channel
            }
            idx_channel_.push_back(per_comp);
        }
        idx_noise_ = c;
        c += M;
        n_params_ = c;
    }

    VectorXd pack_from_spec() const {
        VectorXd v(n_params_);
        int c = 0;
        const int M = spec_.n_channels, n = spec_.input_dim;
        for (const auto& sh : spec_.shifts) {
            if (!stationary_) {
                for (int k = 0; k < n; ++k) v[c++] = sh.center[k];
                v[c++] = softplus_inv(sh.ell[0]);
            }
            for (const auto& comp : sh.components) {
                for (const auto& ch : comp.channels) {
                    v[c++] = softplus_inv(ch.w);
                    for (int k = 0; k < n; ++k) v[c++] = ch.mu[k];
                    for (int k = 0; k < n; ++k) v[c++] = softplus_inv(ch.sigma_diag[k]);
                    for (int k = 0; k < n; ++k) v[c++] = ch.theta[k];
                    v[c++] = ch.phi;
                }
            }
        }
        for (int i = 0; i < M; ++i) v[c++] = softplus_inv(spec_.noise[i]);
        return v;
    }

    void rebuild() {
        const int M = spec_.n_channels, n = spec_.input_dim;
        tbuf_.assign(n, 0.0);

        dcon_ = VectorXd::Ones(n_params_);
        {
            int c = 0;
            for (const auto& sh : spec_.shifts) {
                if (!stationary_) {
                    c += n;  // centers: identity
                    dcon_[c] = sigmoid(raw_[c]);
                    ++c;
                }
                for (const auto& comp : sh.components) {
                    for (size_t i = 0; i < comp.channels.size(); ++i) {
                        dcon_[c] = sigmoid(raw_[c]);  // w
                        c += 1 + n;                   // w, mu
                        for (int k = 0; k < n; ++k, ++c) dcon_[c] = sigmoid(raw_[c]);
                        c += n + 1;  // theta, phi
                    }
                }
            }
            for (int i = 0; i < M; ++i) dcon_[idx_noise_ + i] = sigmoid(raw_[idx_noise_ + i]);
        }

        pair_terms_.assign(M * M, {});
        for (int p = 0; p < static_cast<int>(spec_.shifts.size()); ++p) {
            const ShiftGroup& sh = spec_.shifts[p];
            const int chan_stride = 2 + 3 * n;
            for (int q = 0; q < static_cast<int>(sh.components.size()); ++q) {
                const auto& chans = sh.components[q].channels;
                for (int i = 0; i < M; ++i) {
                    for (int j = 0; j < M; ++j) {
                        Term t;
                        const ChannelSpectralParams& a = chans[i];
                        const ChannelSpectralParams& b = chans[j];
                        t.S.resize(n);
                        t.m.resize(n);
                        t.th.resize(n);
                        t.dS_dsi.resize(n);
                        t.dS_dsj.resize(n);
                        t.dm_dmui.resize(n);
                        t.dm_dmuj.resize(n);
                        t.dm_dsi.resize(n);
                        t.dm_dsj.resize(n);
                        t.dlogw_dmui.resize(n);
                        t.dlogw_dsi.resize(n);
                        t.dlogw_dsj.resize(n);
                        double expo = 0.0;
                        for (int k = 0; k < n; ++k) {
                            const double si = a.sigma_diag[k], sj = b.sigma_diag[k];
                            const double d = si + sj;
                            t.S[k] = 2.0 * si * sj / d;
                            t.m[k] = (si * b.mu[k] + sj * a.mu[k]) / d;
                            t.th[k] = a.theta[k] - b.theta[k];
                            const double dmu = a.mu[k] - b.mu[k];
                            expo += dmu * dmu / d;
                            t.dS_dsi[k] = 2.0 * sj * sj / (d * d);
                            t.dS_dsj[k] = 2.0 * si * si / (d * d);
                            t.dm_dmui[k] = sj / d;
                            t.dm_dmuj[k] = si / d;
                            t.dm_dsi[k] = (b.mu[k] - t.m[k]) / d;
                            t.dm_dsj[k] = (a.mu[k] - t.m[k]) / d;
                            t.dlogw_dmui[k] = -0.5 * dmu / d;  // dlog(w_ij)/dmu_i; mu_j flips sign
                            t.dlogw_dsi[k] = 0.25 * dmu * dmu / (d * d);
                            t.dlogw_dsj[k] = t.dlogw_dsi[k];
                        }
                        const double eE = std::exp(-0.25 * expo);
                        const double w_ij = a.w * b.w * eE;
                        t.dwij_dwi = b.w * eE;
                        t.dwij_dwj = a.w * eE;
                        t.ph = a.phi - b.phi;
                        if (!stationary_) {
                            const double li2 = sh.ell[i] * sh.ell[i];
                            const double lj2 = sh.ell[j] * sh.ell[j];
                            const double sum2 = li2 + lj2;
                            t.L2 = (sum2 > 0.0) ? 2.0 * li2 * lj2 / sum2 : 0.0;
                            if (sum2 > 0.0) {
                                t.dL2_dli = 4.0 * lj2 * lj2 * sh.ell[i] / (sum2 * sum2);
                                t.dL2_dlj = 4.0 * li2 * li2 * sh.ell[j] / (sum2 * sum2);
                            }
                            t.windowed = true;
                        }
                        t.shift = p;
                        const double ell_ij = std::sqrt(t.L2);
                        const double used_ell = (stationary_ || t.L2 == 0.0) ? 0.0 : ell_ij;
                        t.alpha = detail::alpha_from(w_ij, t.S, used_ell);
                        t.beta = (w_ij != 0.0) ? t.alpha / w_ij
                                               : detail::alpha_from(1.0, t.S, used_ell);

                        const int cbase = idx_channel_[p][q];
                        auto chan_base = [&](int ch) { return cbase + ch * chan_stride; };
                        t.idx_wi = chan_base(i);
                        t.idx_wj = chan_base(j);
                        t.idx_mui = chan_base(i) + 1;
                        t.idx_muj = chan_base(j) + 1;
                        t.idx_si = chan_base(i) + 1 + n;
                        t.idx_sj = chan_base(j) + 1 + n;
                        t.idx_thi = chan_base(i) + 1 + 2 * n;
                        t.idx_thj = chan_base(j) + 1 + 2 * n;
                        t.idx_phi = chan_base(i) + 1 + 3 * n;
                        t.idx_phj = chan_base(j) + 1 + 3 * n;
                        if (!stationary_) {
                            t.idx_elli = idx_ell_[p];
                            t.idx_ellj = idx_ell_[p];
                            t.idx_center = idx_center_[p];
                        }
                        pair_terms_[i * M + j].push_back(std::move(t));
                    }
                }
            }
        }
    }

    double term_value(const Term& t, const VectorXd& tau, const VectorXd& xbar) const {
        const int n = spec_.input_dim;
        double quad = 0.0, psi = t.ph;
        for (int k = 0; k < n; ++k) {
            const double tk = tau[k] + t.th[k];
            quad += t.S[k] * tk * tk;
            psi += tk * t.m[k];
        }
        double window = 1.0;
        if (t.windowed && t.L2 > 0.0) {
            const VectorXd& cen = spec_.shifts[t.shift].center;
            double r2 = 0.0;
            for (int k = 0; k < n; ++k) {
                const double dc = xbar[k] - cen[k];
                r2 += dc * dc;
            }
            window = std::exp(-0.5 * t.L2 * r2);
        }
        return t.alpha * std::exp(-0.5 * quad) * std::cos(psi) * window;
    }

    KernelSpec spec_;
    bool stationary_;
    int n_params_ = 0;
    int idx_noise_ = 0;
    std::vector<int> idx_center_, idx_ell_;
    std::vector<std::vector<int>> idx_channel_;
    VectorXd raw_;
    VectorXd dcon_;
    std::vector<std::vector<Term>> pair_terms_;
    mutable std::vector<double> tbuf_;
};

namespace detail {

/// Value of one HSM component plus accumulation of its parameter gradient.
/// Index layout inside one component: w, ell, center(n), sigma(n), mu(n).
constexpr int hsm_component_params(int n) { return 2 + 3 * n; }

inline double hsm_component_value(const HsmComponent& c, const VectorXd& tau,
                                  const VectorXd& xbar) {
    double quad = 0.0, phase = 0.0;
    for (int k = 0; k < tau.size(); ++k) {
        quad += c.sigma_diag[k] * tau[k] * tau[k];
        phase += c.mu[k] * tau[k];
    }
    const double r2 = (xbar - c.center).squaredNorm();
    return c.w * std::exp(-r2 / (2.0 * c.ell * c.ell)) * std::exp(-0.5 * quad) *
           std::cos(phase);
}

/// scale multiplies the component's contribution (LMC mixing weight product).
/// add(idx_offset_in_component, dval) receives constrained-space partials.
template <typename AddFn>
inline void hsm_component_grad(const HsmComponent& c, const VectorXd& tau, const VectorXd& xbar,
                               double scale, AddFn&& add, double* value_out) {
    const int n = static_cast<int>(tau.size());
    double quad = 0.0, phase = 0.0;
    for (int k = 0; k < n; ++k) {
        quad += c.sigma_diag[k] * tau[k] * tau[k];
        phase += c.mu[k] * tau[k];
    }
    const double r2 = (xbar - c.center).squaredNorm();
    const double win = std::exp(-r2 / (2.0 * c.ell * c.ell));
    const double G = std::exp(-0.5 * quad);
    const double cs = std::cos(phase), sn = std::sin(phase);
    const double val = c.w * win * G * cs;
    *value_out = val;

    add(0, scale * val / c.w);                              // w
    add(1, scale * val * r2 / (c.ell * c.ell * c.ell));     // ell
    for (int k = 0; k < n; ++k) {
        add(2 + k, scale * val * (xbar[k] - c.center[k]) / (c.ell * c.ell));  // center
        add(2 + n + k, scale * val * (-0.5 * tau[k] * tau[k]));               // sigma
        add(2 + 2 * n + k, scale * (-c.w * win * G * sn * tau[k]));           // mu
    }
}

}  // namespace detail

/// Independent HSM kernel per channel; zero cross-channel covariance.
class HsmModel final : public KernelModel {
public:
    HsmModel(std::vector<HsmParams> channels, VectorXd noise, int input_dim)
        : channels_(std::move(channels)), noise_(std::move(noise)), input_dim_(input_dim) {
        for (const auto& ch : channels_) ch.validate();
        for (int i = 0; i < noise_.size(); ++i)
            require(noise_[i] > 0.0, "noise entries must be > 0");
        build_layout();
        raw_ = pack_from_params();
        refresh_dcon();
    }

    std::string method() const override { return "hsm"; }
    int n_channels() const override { return static_cast<int>(channels_.size()); }
    int input_dim() const override { return input_dim_; }
    const std::vector<HsmParams>& channels() const { return channels_; }

    double eval(int i, int j, const VectorXd& x, const VectorXd& x_prime) const override {
        if (i != j) return 0.0;
        const VectorXd tau = x - x_prime;
        const VectorXd xbar = 0.5 * (x + x_prime);
        double sum = 0.0;
        for (const auto& c : channels_[i].components)
            sum += detail::hsm_component_value(c, tau, xbar);
        return sum;
    }

    double noise_sigma(int i) const override { return noise_[i]; }
    int param_count() const override { return n_params_; }
    VectorXd pack() const override { return raw_; }

    void unpack(const VectorXd& v) override {
        require(v.size() == n_params_, "packed vector size mismatch");
        raw_ = v;
        int c = 0;
        const int n = input_dim_;
        for (auto& ch : channels_) {
            for (auto& comp : ch.components) {
                comp.w = softplus(v[c++]);
                comp.ell = softplus(v[c++]);
                for (int k = 0; k < n; ++k) comp.center[k] = v[c++];
                for (int k = 0; k < n; ++k) comp.sigma_diag[k] = softplus(v[c++]);
                for (int k = 0; k < n; ++k) comp.mu[k] = v[c++];
            }
        }
        for (int i = 0; i < noise_.size(); ++i) noise_[i] = softplus(v[c++]);
        refresh_dcon();
    }

    void accumulate_entry_grad(int i, int j, const VectorXd& x, const VectorXd& x_prime,
                               double wgt, VectorXd& g) const override {
        if (i != j) return;
        const VectorXd tau = x - x_prime;
        const VectorXd xbar = 0.5 * (x + x_prime);
        int base = channel_base_[i];
        const int stride = detail::hsm_component_params(input_dim_);
        for (const auto& c : channels_[i].components) {
            double val;
            detail::hsm_component_grad(
                c, tau, xbar, 1.0,
                [&](int off, double dval) { g[base + off] += wgt * dval * dcon_[base + off]; },
                &val);
            base += stride;
        }
    }

    void accumulate_noise_grad(int i, double wgt, VectorXd& g) const override {
        const int idx = idx_noise_ + i;
        g[idx] += wgt * 2.0 * noise_[i] * dcon_[idx];
    }

    std::unique_ptr<KernelModel> clone() const override {
        return std::make_unique<HsmModel>(*this);
    }

private:
    void build_layout() {
        const int stride = detail::hsm_component_params(input_dim_);
        int c = 0;
        channel_base_.clear();
        for (const auto& ch : channels_) {
            channel_base_.push_back(c);
            c += stride * static_cast<int>(ch.components.size());
        }
        idx_noise_ = c;
        n_params_ = c + static_cast<int>(noise_.size());
    }

    VectorXd pack_from_params() const {
        VectorXd v(n_params_);
        int c = 0;
        const int n = input_dim_;
        for (const auto& ch : channels_) {
            for (const auto& comp : ch.components) {
                v[c++] = softplus_inv(comp.w);
                v[c++] = softplus_inv(comp.ell);
                for (int k = 0; k < n; ++k) v[c++] = comp.center[k];
                for (int k = 0; k < n; ++k) v[c++] = softplus_inv(comp.sigma_diag[k]);
                for (int k = 0; k < n; ++k) v[c++] = comp.mu[k];
            }
        }
        for (int i = 0; i < noise_.size(); ++i) v[c++] = softplus_inv(noise_[i]);
        return v;
    }

    void refresh_dcon() {
        dcon_ = VectorXd::Ones(n_params_);
        int c = 0;
        const int n = input_dim_;
        for (const auto& ch : channels_) {
            for (size_t q = 0; q < ch.components.size(); ++q) {
                dcon_[c] = sigmoid(raw_[c]);
                dcon_[c + 1] = sigmoid(raw_[c + 1]);
                for (int k = 0; k < n; ++k)
                    dcon_[c + 2 + n + k] = sigmoid(raw_[c + 2 + n + k]);
                c += detail::hsm_component_params(n);
            }
        }
        for (int i = 0; i < noise_.size(); ++i) dcon_[idx_noise_ + i] = sigmoid(raw_[idx_noise_ + i]);
    }

    std::vector<HsmParams> channels_;
    VectorXd noise_;
    int input_dim_;
    int n_params_ = 0, idx_noise_ = 0;
    std::vector<int> channel_base_;
    VectorXd raw_, dcon_;
};

/// Linear model of coregionalization over latent HSM kernels.
class LmcModel final : public KernelModel {
public:
    LmcModel(MatrixXd mixing, std::vector<HsmParams> latents, VectorXd noise, int input_dim)
        : mixing_(std::move(mixing)),
          latents_(std::move(latents)),
          noise_(std::move(noise)),
          input_dim_(input_dim) {
        require(mixing_.cols() == static_cast<Eigen::Index>(latents_.size()),
                "mixing columns must match latent count");
        require(mixing_.allFinite(), "mixing matrix must be finite");
        for (const auto& l : latents_) l.validate();
        build_layout();
        raw_ = pack_from_params();
        refresh_dcon();
    }

    std::string method() const override { return "hsm-lmc"; }
    int n_channels() const override { return static_cast<int>(mixing_.rows()); }
    int input_dim() const override { return input_dim_; }
    const MatrixXd& mixing() const { return mixing_; }
    const std::vector<HsmParams>& latents() const { return latents_; }

    double eval(int i, int j, const VectorXd& x, const VectorXd& x_prime) const override {
        return eval_lmc(mixing_, latents_, x, x_prime, i, j);
    }

    double noise_sigma(int i) const override { return noise_[i]; }
    int param_count() const override { return n_params_; }
    VectorXd pack() const override { return raw_; }

    void unpack(const VectorXd& v) override {
        require(v.size() == n_params_, "packed vector size mismatch");
        raw_ = v;
        int c = 0;
        const int n = input_dim_;
        for (int i = 0; i < mixing_.rows(); ++i)
            for (int q = 0; q < mixing_.cols(); ++q) mixing_(i, q) = v[c++];
        for (auto& lat : latents_) {
            for (auto& comp : lat.components) {
                comp.w = softplus(v[c++]);
                comp.ell = softplus(v[c++]);
                for (int k = 0; k < n; ++k) comp.center[k] = v[c++];
                for (int k = 0; k < n; ++k) comp.sigma_diag[k] = softplus(v[c++]);
                for (int k = 0; k < n; ++k) comp.mu[k] = v[c++];
            }
        }
        for (int i = 0; i < noise_.size(); ++i) noise_[i] = softplus(v[c++]);
        refresh_dcon();
    }

    void accumulate_entry_grad(int i, int j, const VectorXd& x, const VectorXd& x_prime,
                               double wgt, VectorXd& g) const override {
        const VectorXd tau = x - x_prime;
        const VectorXd xbar = 0.5 * (x + x_prime);
        const int Q = static_cast<int>(latents_.size());
        const int stride = detail::hsm_component_params(input_dim_);
        for (int q = 0; q < Q; ++q) {
            const double aiq = mixing_(i, q), ajq = mixing_(j, q);
            double kq = 0.0;
            int base = latent_base_[q];
            for (const auto& c : latents_[q].components) {
                double val;
                detail::hsm_component_grad(
                    c, tau, xbar, aiq * ajq,
                    [&](int off, double dval) { g[base + off] += wgt * dval * dcon_[base + off]; },
                    &val);
                kq += val;
                base += stride;
            }
            g[idx_mixing(i, q)] += wgt * ajq * kq;
            g[idx_mixing(j, q)] += wgt * aiq * kq;
        }
    }

    void accumulate_noise_grad(int i, double wgt, VectorXd& g) const override {
        const int idx = idx_noise_ + i;
        g[idx] += wgt * 2.0 * noise_[i] * dcon_[idx];
    }

    std::unique_ptr<KernelModel> clone() const override {
        return std::make_unique<LmcModel>(*this);
    }

private:
    int idx_mixing(int i, int q) const { return i * static_cast<int>(mixing_.cols()) + q; }

    void build_layout() {
        int c = static_cast<int>(mixing_.size());
        const int stride = detail::hsm_component_params(input_dim_);
        latent_base_.clear();
        for (const auto& lat : latents_) {
            latent_base_.push_back(c);
            c += stride * static_cast<int>(lat.components.size());
        }
        idx_noise_ = c;
        n_params_ = c + static_cast<int>(noise_.size());
    }

    VectorXd pack_from_params() const {
        VectorXd v(n_params_);
        int c = 0;
        const int n = input_dim_;
        for (int i = 0; i < mixing_.rows(); ++i)
            for (int q = 0; q < mixing_.cols(); ++q) v[c++] = mixing_(i, q);
        for (const auto& lat : latents_) {
            for (const auto& comp : lat.components) {
                v[c++] = softplus_inv(comp.w);
                v[c++] = softplus_inv(comp.ell);
                for (int k = 0; k < n; ++k) v[c++] = comp.center[k];
                for (int k = 0; k < n; ++k) v[c++] = softplus_inv(comp.sigma_diag[k]);
                for (int k = 0; k < n; ++k) v[c++] = comp.mu[k];
            }
        }
        for (int i = 0; i < noise_.size(); ++i) v[c++] = softplus_inv(noise_[i]);
        return v;
    }

    void refresh_dcon() {
        dcon_ = VectorXd::Ones(n_params_);
        const int n = input_dim_;
        for (size_t q = 0; q < latents_.size(); ++q) {
            int c = latent_base_[q];
            for (size_t cc = 0; cc < latents_[q].components.size(); ++cc) {
                dcon_[c] = sigmoid(raw_[c]);
                dcon_[c + 1] = sigmoid(raw_[c + 1]);
                for (int k = 0; k < n; ++k)
                    dcon_[c + 2 + n + k] = sigmoid(raw_[c + 2 + n + k]);
                c += detail::hsm_component_params(n);
            }
        }
        for (int i = 0; i < noise_.size(); ++i) dcon_[idx_noise_ + i] = sigmoid(raw_[idx_noise_ + i]);
    }

    MatrixXd mixing_;
    std::vector<HsmParams> latents_;
    VectorXd noise_;
    int input_dim_;
    int n_params_ = 0, idx_noise_ = 0;
    std::vector<int> latent_base_;
    VectorXd raw_, dcon_;
};

}  // namespace mohsm
