#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mohsm/data_io.hpp"
#include "mohsm/gp.hpp"
#include "mohsm/metrics.hpp"
#include "mohsm/models.hpp"
#include "mohsm/spectral_init.hpp"
#include "mohsm/trainer.hpp"

namespace mohsm {

/// Configuration of the synthetic experiment: a nonstationary generator GP,
/// its derivative and a delayed copy, with imputation masks.
struct SynthConfig {
    int n_points = 500;
    double lo = -20.0, hi = 20.0;
    HsmParams generator;
    double delay = 2.0;
    double derivative_step = 0.0;  // 0 -> 1e-4 * (hi - lo)
    double mask_deriv_lo = -10.0, mask_deriv_hi = -5.0;  // channel 2 (derivative)
    double mask_delay_lo = -5.0, mask_delay_hi = 5.0;    // channel 3 (delayed)
    double train_fraction = 0.7;
    std::uint64_t seed = 1;

    static SynthConfig defaults() {
        SynthConfig c;
        HsmComponent left, right;
        left.w = right.w = 1.0;
        left.ell = right.ell = 10.0;
        left.center = VectorXd::Constant(1, -20.0);
        right.center = VectorXd::Constant(1, 20.0);
        left.sigma_diag = right.sigma_diag = VectorXd::Constant(1, 0.25);
        left.mu = VectorXd::Constant(1, 1.5);
        right.mu = VectorXd::Constant(1, 4.0);
        c.generator.components = {left, right};
        return c;
    }

    double step() const { return derivative_step > 0.0 ? derivative_step : 1e-4 * (hi - lo); }

    void validate() const {
        if (n_points < 4) throw ConfigError("field 'n_points' must be >= 4");
        if (!(hi > lo)) throw ConfigError("field 'range' must have hi > lo");
        if (!(train_fraction > 0.0 && train_fraction < 1.0))
            throw ConfigError("field 'train_fraction' must be in (0, 1)");
        auto inside = [&](double a, double b) { return a <= b && a >= lo && b <= hi; };
        if (!inside(mask_deriv_lo, mask_deriv_hi))
            throw ConfigError("field 'mask_derivative' must be a well-ordered range inside [lo, hi]");
        if (!inside(mask_delay_lo, mask_delay_hi))
            throw ConfigError("field 'mask_delayed' must be a well-ordered range inside [lo, hi]");
        generator.validate();
    }

    static SynthConfig from_json(const json& j) {
        SynthConfig c = defaults();
        try {
            c.n_points = j.value("n_points", c.n_points);
            if (j.contains("range")) {
                c.lo = j.at("range").at(0).get<double>();
                c.hi = j.at("range").at(1).get<double>();
            }
            c.delay = j.value("delay", c.delay);
            c.derivative_step = j.value("derivative_step", c.derivative_step);
            if (j.contains("mask_derivative")) {
                c.mask_deriv_lo = j.at("mask_derivative").at(0).get<double>();
                c.mask_deriv_hi = j.at("mask_derivative").at(1).get<double>();
            }
            if (j.contains("mask_delayed")) {
                c.mask_delay_lo = j.at("mask_delayed").at(0).get<double>();
                c.mask_delay_hi = j.at("mask_delayed").at(1).get<double>();
            }
            c.train_fraction = j.value("train_fraction", c.train_fraction);
            c.seed = j.value("seed", c.seed);
            if (j.contains("generator")) c.generator = hsm_params_from_json(j.at("generator"));
        } catch (const json::exception& e) {
            throw ConfigError(std::string("invalid synth config: ") + e.what());
        }
        c.validate();
        return c;
    }
};

/// Exact ground-truth covariance of the 3-channel process (f, f', f delayed)
/// over shared inputs xs, channel-major layout (index = channel * N + i).
/// The derivative channel is represented by its central-difference functional,
/// so the Gram is the covariance of a linear map of f and PSD by construction.
inline MatrixXd ground_truth_gram(const HsmParams& gen, double delay, const VectorXd& xs,
                                  double step) {
    gen.validate();
    require(step > 0.0, "derivative step must be > 0");
    const int N = static_cast<int>(xs.size());
    struct Lin {
        double coef;
        double offset;
    };
    const std::vector<std::vector<Lin>> funcs = {
        {{1.0, 0.0}},
        {{0.5 / step, step}, {-0.5 / step, -step}},
        {{1.0, -delay}},
    };
    auto k = [&](double a, double b) {
        return eval_hsm(gen, VectorXd::Constant(1, a), VectorXd::Constant(1, b));
    };
    MatrixXd K(3 * N, 3 * N);
    for (int ci = 0; ci < 3; ++ci) {
        for (int cj = ci; cj < 3; ++cj) {
            for (int a = 0; a < N; ++a) {
                for (int b = 0; b < N; ++b) {
                    double v = 0.0;
                    for (const Lin& la : funcs[ci])
                        for (const Lin& lb : funcs[cj])
                            v += la.coef * lb.coef * k(xs[a] + la.offset, xs[b] + lb.offset);
                    K(ci * N + a, cj * N + b) = v;
                    if (cj != ci) K(cj * N + b, ci * N + a) = v;
                }
            }
        }
    }
    // exact symmetry: within-block entries are computed independently
    K = 0.5 * (K + K.transpose()).eval();
    return K;
}

struct SynthData {
    Dataset train;
    Dataset test;
    MatrixXd gram;               // ground truth over all 3N shared inputs
    VectorXd xs;                 // shared input locations
    std::vector<int> train_idx;  // global indices (channel * N + i) of train points
    std::vector<int> test_idx;
};

/// Draws the joint 3-channel sample, applies the imputation masks (masked
/// points go to the test set), and splits the remainder by train_fraction.
inline SynthData generate(const SynthConfig& cfg) {
    cfg.validate();
    SynthData out;
    const int N = cfg.n_points;
    out.xs = VectorXd::LinSpaced(N, cfg.lo, cfg.hi);
    out.gram = ground_truth_gram(cfg.generator, cfg.delay, out.xs, cfg.step());
    const VectorXd y = sample_gaussian(out.gram, cfg.seed);

    const std::vector<std::string> names = {"f", "df", "delayed"};
    out.train.channel_names = out.test.channel_names = names;

    std::vector<int> pool;
    for (int ch = 0; ch < 3; ++ch) {
        for (int a = 0; a < N; ++a) {
            const double x = out.xs[a];
            const bool masked =
                (ch == 1 && x >= cfg.mask_deriv_lo && x <= cfg.mask_deriv_hi) ||
                (ch == 2 && x >= cfg.mask_delay_lo && x <= cfg.mask_delay_hi);
            const int g = ch * N + a;
            if (masked) {
                out.test.points.push_back({ch, VectorXd::Constant(1, x), y[g]});
                out.test_idx.push_back(g);
            } else {
                pool.push_back(g);
            }
        }
    }
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::shuffle(pool.begin(), pool.end(), rng);
    const int n_train = static_cast<int>(std::round(cfg.train_fraction * pool.size()));
    std::vector<int> tr(pool.begin(), pool.begin() + n_train);
    std::vector<int> te(pool.begin() + n_train, pool.end());
    std::sort(tr.begin(), tr.end());
    std::sort(te.begin(), te.end());
    for (int g : tr) {
        out.train.points.push_back({g / N, VectorXd::Constant(1, out.xs[g % N]), y[g]});
        out.train_idx.push_back(g);
    }
    for (int g : te) {
        out.test.points.push_back({g / N, VectorXd::Constant(1, out.xs[g % N]), y[g]});
        out.test_idx.push_back(g);
    }
    out.train.fit_normalization();  // statistics from the training portion only
    return out;
}

/// Builds an initialized model of the requested method from training data.
inline std::unique_ptr<KernelModel> init_model(const std::string& method, const Dataset& train,
                                               int P, int Q,
                                               std::vector<PeriodogramResult>* periodograms = nullptr) {
    if (method == "mohsm" || method == "mosm") {
        const bool stationary = (method == "mosm");
        // A stationary model has a single global window.
        InitResult init = init_spec(train, stationary ? 1 : P, stationary ? P * Q : Q, stationary);
        if (periodograms) *periodograms = std::move(init.periodograms);
        return std::make_unique<MohsmModel>(std::move(init.spec), stationary);
    }
    if (method == "hsm") {
        auto [channels, noise] = init_hsm(train, P, Q);
        return std::make_unique<HsmModel>(std::move(channels), std::move(noise), 1);
    }
    if (method == "hsm-lmc") {
        LmcInit init = init_lmc(train, P, Q);
        return std::make_unique<LmcModel>(std::move(init.mixing), std::move(init.latents),
                                          std::move(init.noise), 1);
    }
    throw ConfigError("unknown method: " + method);
}

/// Kernel-only Gram over the given inputs, rescaled back to original data
/// units using the training normalization.
inline MatrixXd denormalized_gram(const KernelModel& model, const std::vector<InputPoint>& inputs,
                                  const Normalization& nz) {
    MatrixXd K = build_gram(model, inputs, inputs);
    for (int a = 0; a < K.rows(); ++a) {
        const double sa = nz.channel_scale(inputs[a].channel);
        for (int b = 0; b < K.cols(); ++b)
            K(a, b) *= sa * nz.channel_scale(inputs[b].channel);
    }
    return K;
}

struct BenchmarkOptions {
    std::vector<std::string> methods = {"mohsm", "mosm", "hsm", "hsm-lmc"};
    int trials = 5;
    int P = 2;
    int Q = 1;
    TrainConfig train;
    std::string out_dir;  // when set, per-trial prediction CSVs are written

    // a higher rate than the training default: benchmark trials are capped at
    // 200 iterations and the windowed models need the faster early progress
    BenchmarkOptions() {
        train.max_iters = 200;
        train.learning_rate = 0.05;
    }
};

namespace detail {

inline void write_predictions_csv(const std::string& path, const SynthData& data,
                                  const PosteriorResult& post) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "x,channel,y_true,y_pred,variance\n";
    out.precision(17);
    for (size_t a = 0; a < data.test.points.size(); ++a) {
        const auto& p = data.test.points[a];
        out << p.x[0] << "," << data.test.channel_names[p.channel] << "," << p.y << ","
            << post.mean[a] << "," << post.variance[a] << "\n";
    }
}

}  // namespace detail

/// Runs the synthetic benchmark: per trial, generate / initialize / train /
/// score CMD between the trained Gram and the ground truth over the training
/// inputs. Per-trial failures are recorded in the report, not fatal.
inline MetricReport run_benchmark(const SynthConfig& base_cfg, const BenchmarkOptions& opts) {
    MetricReport report;
    std::map<std::string, std::vector<double>> cmd_values;
    std::map<std::string, std::vector<double>> nll_values;

    for (int t = 0; t < opts.trials; ++t) {
        SynthConfig cfg = base_cfg;
        cfg.seed = base_cfg.seed + static_cast<std::uint64_t>(t);
        SynthData data;
        try {
            data = generate(cfg);
        } catch (const std::exception& e) {
            report.failures.push_back("trial " + std::to_string(t) + " generate: " + e.what());
            continue;
        }
        const auto train_inputs = inputs_of(data.train);
        MatrixXd truth(train_inputs.size(), train_inputs.size());
        for (size_t a = 0; a < data.train_idx.size(); ++a)
            for (size_t b = 0; b < data.train_idx.size(); ++b)
                truth(a, b) = data.gram(data.train_idx[a], data.train_idx[b]);

        for (const auto& method : opts.methods) {
            try {
                auto model = init_model(method, data.train, opts.P, opts.Q);
                const TrainReport tr = optimize(*model, data.train, opts.train);
                const MatrixXd trained =
                    denormalized_gram(*model, train_inputs, data.train.normalization);
                cmd_values[method].push_back(cmd(trained, truth));
                nll_values[method].push_back(tr.final_nll);
                if (!opts.out_dir.empty()) {
                    const PosteriorResult post =
                        posterior(*model, data.train, inputs_of(data.test));
                    detail::write_predictions_csv(opts.out_dir + "/trial" + std::to_string(t) +
                                                      "_" + method + "_predictions.csv",
                                                  data, post);
                }
            } catch (const std::exception& e) {
                report.failures.push_back("trial " + std::to_string(t) + " " + method + ": " +
                                          e.what());
            }
        }
    }
    for (const auto& method : opts.methods) {
        auto it = cmd_values.find(method);
        if (it == cmd_values.end() || it->second.empty()) continue;
        report.add(method, "cmd", "overall", it->second);
        report.add(method, "train_nll", "overall", nll_values[method]);
    }
    return report;
}

}  // namespace mohsm
