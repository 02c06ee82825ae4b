#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "mohsm/kernels.hpp"
#include "mohsm/types.hpp"

namespace mohsm {

/// Periodogram of one window of one channel; freqs are angular (rad per
/// input unit), strictly increasing.
struct PeriodogramResult {
    VectorXd freqs;
    VectorXd power;
    int window_id = 0;
};

struct CentersResult {
    VectorXd centers;
    double ell_init = 0.0;  // frequency-domain lengthscale; 1/ell = window time std
};

/// Equidistant window centers over [lo, hi], endpoints included for P >= 2.
inline CentersResult place_centers(double lo, double hi, int P) {
    require(P >= 1, "need at least one window");
    require(hi > lo, "input range must have positive length");
    CentersResult res;
    if (P == 1) {
        res.centers = VectorXd::Constant(1, 0.5 * (lo + hi));
        res.ell_init = 2.0 / (hi - lo);  // time std = half-range
    } else {
        res.centers = VectorXd::LinSpaced(P, lo, hi);
        res.ell_init = (P - 1) / (hi - lo);  // time std = spacing
    }
    return res;
}

/// Classic normalized Lomb-Scargle periodogram on an angular-frequency grid.
/// Constant series are normalized by the uncentered mean square instead of the
/// (zero) variance, which concentrates power in the lowest bin.
inline PeriodogramResult lomb_scargle(const VectorXd& x, const VectorXd& y,
                                      const VectorXd& freq_grid) {
    const int N = static_cast<int>(x.size());
    require(N >= 4 && y.size() == N, "need at least 4 samples");
    require(freq_grid.size() >= 1, "empty frequency grid");
    for (int b = 1; b < freq_grid.size(); ++b)
        require(freq_grid[b] > freq_grid[b - 1], "frequency grid must be strictly increasing");
    require((x.array() != x[0]).any(), "sample locations are all equal");

    const double ybar = y.mean();
    VectorXd r = y.array() - ybar;
    double norm = r.squaredNorm() / (N - 1);
    if (norm <= 1e-15 * std::max(1.0, y.squaredNorm() / N)) {
        r = y;
        norm = y.squaredNorm() / N;
    }
    PeriodogramResult res;
    res.freqs = freq_grid;
    res.power = VectorXd::Zero(freq_grid.size());
    if (norm <= 0.0) return res;

    for (int b = 0; b < freq_grid.size(); ++b) {
        const double w = freq_grid[b];
        double s2 = 0.0, c2 = 0.0;
        for (int a = 0; a < N; ++a) {
            s2 += std::sin(2.0 * w * x[a]);
            c2 += std::cos(2.0 * w * x[a]);
        }
        const double tau = 0.5 * std::atan2(s2, c2) / w;
        double cs = 0.0, sn = 0.0, cc = 0.0, ss = 0.0;
        for (int a = 0; a < N; ++a) {
            const double arg = w * (x[a] - tau);
            const double ca = std::cos(arg), sa = std::sin(arg);
            cs += r[a] * ca;
            sn += r[a] * sa;
            cc += ca * ca;
            ss += sa * sa;
        }
        double p = 0.0;
        if (cc > 0.0) p += cs * cs / cc;
        if (ss > 0.0) p += sn * sn / ss;
        res.power[b] = 0.5 * p / norm;
    }
    return res;
}

namespace detail {

/// Angular-frequency grid: 4x oversampled relative to 1/range, capped at the
/// median-spacing Nyquist rate.
inline VectorXd default_freq_grid(const VectorXd& x) {
    const int N = static_cast<int>(x.size());
    require(N >= 2, "need at least 2 samples for a frequency grid");
    std::vector<double> xs(x.data(), x.data() + N);
    std::sort(xs.begin(), xs.end());
    const double range = xs.back() - xs.front();
    require(range > 0.0, "zero input range");
    std::vector<double> dx;
    for (int a = 1; a < N; ++a)
        if (xs[a] > xs[a - 1]) dx.push_back(xs[a] - xs[a - 1]);
    require(!dx.empty(), "zero input range");
    std::nth_element(dx.begin(), dx.begin() + dx.size() / 2, dx.end());
    const double med = dx[dx.size() / 2];
    const double dw = kTwoPi / (4.0 * range);
    const double wmax = kPi / med;
    int nb = static_cast<int>(std::floor(wmax / dw));
    nb = std::max(nb, 8);
    VectorXd grid(nb);
    for (int b = 0; b < nb; ++b) grid[b] = dw * (b + 1);
    return grid;
}

struct Peak {
    double freq = 0.0;
    double power = 0.0;
    double hwhm = 0.0;
};

/// Greedy dominant-peak extraction with a 2-bin suppression radius; peaks
/// below the false-alarm threshold ln(n_bins/0.01) are not returned.
inline std::vector<Peak> pick_peaks(const PeriodogramResult& pg, int max_peaks) {
    const int B = static_cast<int>(pg.power.size());
    const double thresh = std::log(B / 0.01);
    VectorXd pw = pg.power;
    std::vector<Peak> peaks;
    const double dw = (B > 1) ? pg.freqs[1] - pg.freqs[0] : 1.0;
    while (static_cast<int>(peaks.size()) < max_peaks) {
        int best = 0;
        pw.maxCoeff(&best);
        if (pw[best] < thresh) break;
        Peak pk;
        pk.freq = pg.freqs[best];
        pk.power = pg.power[best];
        const double half = 0.5 * pg.power[best];
        double wr = dw, wl = dw;
        for (int b = best + 1; b < B; ++b) {
            if (pg.power[b] <= half) {
                const double f = (pg.power[b - 1] - half) /
                                 std::max(pg.power[b - 1] - pg.power[b], 1e-300);
                wr = pg.freqs[b - 1] + f * dw - pg.freqs[best];
                break;
            }
        }
        for (int b = best - 1; b >= 0; --b) {
            if (pg.power[b] <= half) {
                const double f = (pg.power[b + 1] - half) /
                                 std::max(pg.power[b + 1] - pg.power[b], 1e-300);
                wl = pg.freqs[best] - (pg.freqs[b + 1] - f * dw);
                break;
            }
        }
        pk.hwhm = 0.5 * (wl + wr);
        peaks.push_back(pk);
        for (int b = std::max(0, best - 2); b <= std::min(B - 1, best + 2); ++b)
            pw[b] = -1.0;
    }
    return peaks;
}

struct WindowedSeries {
    VectorXd x;
    VectorXd y;       // tapered, centered values
    double variance = 0.0;
    double stddev = 0.0;
};

/// Gaussian-tapered extraction of one channel around one window center,
/// on normalized targets.
inline WindowedSeries window_series(const Dataset& data, int channel, double center,
                                    double ell) {
    std::vector<double> xs, ys, wt;
    for (const auto& p : data.points) {
        if (p.channel != channel) continue;
        const double w = std::exp(-0.5 * ell * ell * (p.x[0] - center) * (p.x[0] - center));
        if (w < 1e-3) continue;
        xs.push_back(p.x[0]);
        ys.push_back(data.normalization.apply(channel, p.y));
        wt.push_back(w);
    }
    if (xs.size() < 4) {  // window too empty: fall back to the untapered channel
        xs.clear();
        ys.clear();
        wt.clear();
        for (const auto& p : data.points) {
            if (p.channel != channel) continue;
            xs.push_back(p.x[0]);
            ys.push_back(data.normalization.apply(channel, p.y));
            wt.push_back(1.0);
        }
    }
    require(xs.size() >= 4, "channel has fewer than 4 points");
    double wsum = 0.0, mean = 0.0;
    for (size_t a = 0; a < xs.size(); ++a) {
        wsum += wt[a];
        mean += wt[a] * ys[a];
    }
    mean /= wsum;
    WindowedSeries ws;
    ws.x = Eigen::Map<VectorXd>(xs.data(), xs.size());
    ws.y.resize(xs.size());
    double var = 0.0;
    for (size_t a = 0; a < xs.size(); ++a) {
        ws.y[a] = wt[a] * (ys[a] - mean);
        var += wt[a] * (ys[a] - mean) * (ys[a] - mean);
    }
    ws.variance = var / wsum;
    ws.stddev = std::sqrt(std::max(ws.variance, 0.0));
    return ws;
}

struct ChannelWindowInit {
    std::vector<Peak> peaks;       // exactly Q entries after fallback padding
    std::vector<bool> from_peak;   // false for fallback-seeded components
    double variance = 0.0;
    double stddev = 0.0;
    double sigma_floor = 0.0;
    double nyquist = 0.0;
    PeriodogramResult periodogram;
};

inline ChannelWindowInit channel_window_init(const Dataset& data, int channel, double center,
                                             double ell, int Q, int window_id) {
    const WindowedSeries ws = window_series(data, channel, center, ell);
    const VectorXd grid = default_freq_grid(ws.x);
    ChannelWindowInit out;
    out.periodogram = lomb_scargle(ws.x, ws.y, grid);
    out.periodogram.window_id = window_id;
    out.variance = std::max(ws.variance, 1e-12);
    out.stddev = std::max(ws.stddev, 1e-6);
    out.nyquist = grid[grid.size() - 1];
    out.sigma_floor = 0.01 * out.nyquist;
    out.peaks = pick_peaks(out.periodogram, Q);
    out.from_peak.assign(out.peaks.size(), true);
    const int missing = Q - static_cast<int>(out.peaks.size());
    for (int m = 0; m < missing; ++m) {
        Peak pk;
        pk.freq = out.nyquist * (m + 1) / (missing + 1);
        pk.power = 0.0;
        pk.hwhm = out.sigma_floor;
        out.peaks.push_back(pk);
        out.from_peak.push_back(false);
    }
    return out;
}

/// Peaks picked from the channel-averaged periodogram of one window, plus the
/// per-channel periodograms and moments needed to assign per-channel weights.
struct PooledWindowInit {
    std::vector<Peak> peaks;     // exactly Q entries after fallback padding
    std::vector<bool> from_peak;
    std::vector<int> peak_bin;   // grid index of each peak; -1 for fallback
    std::vector<PeriodogramResult> periodograms;  // one per channel
    std::vector<double> variance;
    std::vector<double> stddev;
    double sigma_floor = 0.0;
    double nyquist = 0.0;
};

/// All channels of one window share a frequency grid (built from the pooled
/// sample locations) and the peak set of the averaged periodogram, so every
/// channel receives the same (mu, sigma) per component.
inline PooledWindowInit pooled_window_init(const Dataset& data, int M, double center,
                                           double ell, int Q, int window_id) {
    PooledWindowInit out;
    std::vector<WindowedSeries> ws(M);
    std::vector<double> all_x;
    for (int i = 0; i < M; ++i) {
        ws[i] = window_series(data, i, center, ell);
        all_x.insert(all_x.end(), ws[i].x.data(), ws[i].x.data() + ws[i].x.size());
    }
    const VectorXd grid =
        default_freq_grid(Eigen::Map<VectorXd>(all_x.data(), static_cast<int>(all_x.size())));
    VectorXd pooled = VectorXd::Zero(grid.size());
    for (int i = 0; i < M; ++i) {
        PeriodogramResult pg = lomb_scargle(ws[i].x, ws[i].y, grid);
        pg.window_id = window_id;
        pooled += pg.power;
        out.periodograms.push_back(std::move(pg));
        out.variance.push_back(std::max(ws[i].variance, 1e-12));
        out.stddev.push_back(std::max(ws[i].stddev, 1e-6));
    }
    pooled /= M;
    out.nyquist = grid[grid.size() - 1];
    out.sigma_floor = 0.01 * out.nyquist;

    PeriodogramResult avg;
    avg.freqs = grid;
    avg.power = pooled;
    avg.window_id = window_id;
    out.peaks = pick_peaks(avg, Q);
    out.from_peak.assign(out.peaks.size(), true);
    const double dw = (grid.size() > 1) ? grid[1] - grid[0] : 1.0;
    for (const auto& pk : out.peaks)
        out.peak_bin.push_back(static_cast<int>(std::lround((pk.freq - grid[0]) / dw)));
    const int missing = Q - static_cast<int>(out.peaks.size());
    for (int m = 0; m < missing; ++m) {
        Peak pk;
        pk.freq = out.nyquist * (m + 1) / (missing + 1);
        pk.power = 0.0;
        pk.hwhm = out.sigma_floor;
        out.peaks.push_back(pk);
        out.from_peak.push_back(false);
        out.peak_bin.push_back(-1);
    }
    return out;
}

}  // namespace detail

/// Result of the spectral initialization: the spec plus the periodograms that
/// produced it (for inspection dumps).
struct InitResult {
    KernelSpec spec;
    std::vector<PeriodogramResult> periodograms;
};

/// Data-driven initialization: equidistant windows, per-window Lomb-Scargle
/// spectra, dominant peaks mapped to (mu, sigma, w); theta = phi = 0.
/// With stationary = true the weight inversion uses the stationary alpha
/// normalization (MOSM initialization).
inline InitResult init_spec(const Dataset& data, int P, int Q, bool stationary = false) {
    require(P >= 1 && Q >= 1, "need P >= 1 and Q >= 1");
    data.validate();
    const int M = data.n_channels();
    require(M >= 1, "dataset has no channels");
    for (const auto& p : data.points)
        require(p.x.size() == 1, "spectral initialization is 1-D");

    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& p : data.points) {
        lo = std::min(lo, p.x[0]);
        hi = std::max(hi, p.x[0]);
    }
    const CentersResult cr = place_centers(lo, hi, P);

    InitResult res;
    KernelSpec& spec = res.spec;
    spec.n_channels = M;
    spec.input_dim = 1;
    spec.noise = VectorXd::Zero(M);

    std::vector<double> channel_std(M, 0.0);
    for (int i = 0; i < M; ++i) {
        double sum = 0.0, sumsq = 0.0;
        int cnt = 0;
        for (const auto& p : data.points) {
            if (p.channel != i) continue;
            const double yv = data.normalization.apply(i, p.y);
            sum += yv;
            sumsq += yv * yv;
            ++cnt;
        }
        require(cnt >= 4, "every channel needs at least 4 points");
        const double mean = sum / cnt;
        channel_std[i] = std::sqrt(std::max(sumsq / cnt - mean * mean, 1e-12));
        spec.noise[i] = 0.1 * channel_std[i];
    }

    for (int p = 0; p < P; ++p) {
        ShiftGroup sh;
        sh.center = VectorXd::Constant(1, cr.centers[p]);
        sh.ell = VectorXd::Constant(M, stationary ? 0.0 : cr.ell_init);
        sh.components.resize(Q);
        for (auto& comp : sh.components) comp.channels.resize(M);

        if (stationary) {
            // Stationary mixtures tolerate fully channel-specific spectra.
            for (int i = 0; i < M; ++i) {
                const auto cwi =
                    detail::channel_window_init(data, i, cr.centers[p], cr.ell_init, Q, p);
                res.periodograms.push_back(cwi.periodogram);
                double total_power = 0.0;
                for (int q = 0; q < Q; ++q)
                    if (cwi.from_peak[q]) total_power += cwi.peaks[q].power;
                for (int q = 0; q < Q; ++q) {
                    ChannelSpectralParams ch;
                    ch.mu = VectorXd::Constant(1, cwi.peaks[q].freq);
                    const double hw = std::max(cwi.peaks[q].hwhm, cwi.sigma_floor);
                    ch.sigma_diag = VectorXd::Constant(1, hw * hw);
                    ch.theta = VectorXd::Zero(1);
                    ch.phi = 0.0;
                    if (cwi.from_peak[q]) {
                        const double rel = cwi.peaks[q].power / total_power;
                        const double alpha_unit = detail::alpha_from(1.0, ch.sigma_diag, 0.0);
                        ch.w = std::sqrt(cwi.variance * rel / alpha_unit);
                    } else {
                        ch.w = 0.01 * cwi.stddev;
                    }
                    sh.components[q].channels[i] = std::move(ch);
                }
            }
        } else {
            // Windowed kernels are only guaranteed positive semidefinite when
            // every channel of a component shares (mu, sigma), so the peaks
            // come from the channel-averaged periodogram; only the weights
            // stay channel-specific.
            const auto pwi =
                detail::pooled_window_init(data, M, cr.centers[p], cr.ell_init, Q, p);
            for (const auto& pg : pwi.periodograms) res.periodograms.push_back(pg);
            for (int i = 0; i < M; ++i) {
                double total_power = 0.0;
                for (int q = 0; q < Q; ++q)
                    if (pwi.from_peak[q])
                        total_power +=
                            std::max(pwi.periodograms[i].power[pwi.peak_bin[q]], 0.0);
                for (int q = 0; q < Q; ++q) {
                    ChannelSpectralParams ch;
                    ch.mu = VectorXd::Constant(1, pwi.peaks[q].freq);
                    const double hw = std::max(pwi.peaks[q].hwhm, pwi.sigma_floor);
                    ch.sigma_diag = VectorXd::Constant(1, hw * hw);
                    ch.theta = VectorXd::Zero(1);
                    ch.phi = 0.0;
                    double w = 0.0;
                    if (pwi.from_peak[q] && total_power > 0.0) {
                        const double rel =
                            std::max(pwi.periodograms[i].power[pwi.peak_bin[q]], 0.0) /
                            total_power;
                        const double alpha_unit =
                            detail::alpha_from(1.0, ch.sigma_diag, cr.ell_init);
                        w = std::sqrt(pwi.variance[i] * rel / alpha_unit);
                    }
                    ch.w = std::max(w, 0.01 * pwi.stddev[i]);
                    sh.components[q].channels[i] = std::move(ch);
                }
            }
        }
        spec.shifts.push_back(std::move(sh));
    }
    spec.validate();
    return res;
}

/// HSM initialization: independent per-channel mixtures from the same
/// windowed periodograms; ell here is the time-domain window lengthscale.
inline std::pair<std::vector<HsmParams>, VectorXd> init_hsm(const Dataset& data, int P, int Q) {
    require(P >= 1 && Q >= 1, "need P >= 1 and Q >= 1");
    const int M = data.n_channels();
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& p : data.points) {
        require(p.x.size() == 1, "spectral initialization is 1-D");
        lo = std::min(lo, p.x[0]);
        hi = std::max(hi, p.x[0]);
    }
    const CentersResult cr = place_centers(lo, hi, P);

    std::vector<HsmParams> channels(M);
    VectorXd noise(M);
    for (int i = 0; i < M; ++i) {
        double w_total = 0.0;
        for (int p = 0; p < P; ++p) {
            const auto cwi =
                detail::channel_window_init(data, i, cr.centers[p], cr.ell_init, Q, p);
            double total_power = 0.0;
            for (int q = 0; q < Q; ++q)
                if (cwi.from_peak[q]) total_power += cwi.peaks[q].power;
            for (int q = 0; q < Q; ++q) {
                HsmComponent c;
                c.ell = 1.0 / cr.ell_init;
                c.center = VectorXd::Constant(1, cr.centers[p]);
                c.mu = VectorXd::Constant(1, cwi.peaks[q].freq);
                const double hw = std::max(cwi.peaks[q].hwhm, cwi.sigma_floor);
                c.sigma_diag = VectorXd::Constant(1, hw * hw);
                c.w = cwi.from_peak[q]
                          ? cwi.variance * cwi.peaks[q].power / total_power
                          : 0.01 * cwi.stddev;
                channels[i].components.push_back(std::move(c));
            }
            w_total += cwi.stddev;
        }
        noise[i] = 0.1 * w_total / P;
    }
    return {std::move(channels), std::move(noise)};
}

struct LmcInit {
    MatrixXd mixing;
    std::vector<HsmParams> latents;
    VectorXd noise;
};

/// LMC initialization: latent HSM kernels estimated from the pooled channels,
/// mixing seeded near all-ones with a deterministic symmetry-breaking tilt.
inline LmcInit init_lmc(const Dataset& data, int P, int Q) {
    const int M = data.n_channels();
    Dataset pooled;
    pooled.channel_names = {"pooled"};
    pooled.normalization = Normalization{};
    for (const auto& p : data.points)
        pooled.points.push_back({0, p.x, data.normalization.apply(p.channel, p.y)});
    const auto [latents_per_channel, pooled_noise] = init_hsm(pooled, P, Q);

    LmcInit out;
    out.latents.resize(P * Q);
    const auto& comps = latents_per_channel[0].components;
    for (int q = 0; q < P * Q; ++q) {
        HsmComponent c = comps[q];
        c.w = std::max(c.w, 1e-6);
        out.latents[q].components.push_back(std::move(c));
    }
    // Scale mixing so sum_q A_iq^2 w_q matches unit (normalized) variance.
    double wsum = 0.0;
    for (const auto& l : out.latents) wsum += l.components[0].w;
    const double a0 = 1.0 / std::sqrt(std::max(wsum, 1e-12));
    out.mixing.resize(M, P * Q);
    for (int i = 0; i < M; ++i)
        for (int q = 0; q < P * Q; ++q)
            out.mixing(i, q) = a0 * (1.0 + 0.1 * (((i + q) % 2) ? 1.0 : -1.0));
    out.noise = VectorXd::Zero(M);
    for (int i = 0; i < M; ++i) {
        double sum = 0.0, sumsq = 0.0;
        int cnt = 0;
        for (const auto& p : data.points) {
            if (p.channel != i) continue;
            const double yv = data.normalization.apply(i, p.y);
            sum += yv;
            sumsq += yv * yv;
            ++cnt;
        }
        const double mean = (cnt > 0) ? sum / cnt : 0.0;
        const double var = (cnt > 0) ? std::max(sumsq / cnt - mean * mean, 1e-12) : 1e-12;
        out.noise[i] = 0.1 * std::sqrt(var);
    }
    return out;
}

}  // namespace mohsm
