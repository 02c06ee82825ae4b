#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <chrono>
#include <deque>
#include <string>
#include <vector>

#include "mohsm/gp.hpp"
#include "mohsm/models.hpp"

namespace mohsm {

/// NLL and its exact gradient with respect to the model's packed parameters,
/// via dNLL = 1/2 sum_ab (Ky^-1 - aa^T)_ab dKy_ab.
inline double value_and_gradient(const KernelModel& model, const Dataset& data, VectorXd& grad) {
    require(data.size() > 0, "empty dataset");
    const auto inputs = inputs_of(data);
    const int N = data.size();
    const MatrixXd K = build_gram(model, inputs, inputs);
    const CholFactor f = factorize(K, noise_diag_for(model, inputs));
    const VectorXd y = normalized_targets(data);

    const auto L = f.lower.triangularView<Eigen::Lower>();
    const VectorXd half = L.solve(y);
    const double value = 0.5 * half.squaredNorm() + 0.5 * f.log_det + 0.5 * N * std::log(kTwoPi);

    VectorXd alpha = half;
    f.lower.transpose().triangularView<Eigen::Upper>().solveInPlace(alpha);

    MatrixXd Kinv = MatrixXd::Identity(N, N);
    L.solveInPlace(Kinv);
    f.lower.transpose().triangularView<Eigen::Upper>().solveInPlace(Kinv);

    grad = VectorXd::Zero(model.param_count());
    for (int a = 0; a < N; ++a) {
        {
            const double wgt = 0.5 * (Kinv(a, a) - alpha[a] * alpha[a]);
            model.accumulate_entry_grad(inputs[a].channel, inputs[a].channel, inputs[a].x,
                                        inputs[a].x, wgt, grad);
            model.accumulate_noise_grad(inputs[a].channel, wgt, grad);
        }
        for (int b = a + 1; b < N; ++b) {
            const double wgt = Kinv(a, b) - alpha[a] * alpha[b];
            model.accumulate_entry_grad(inputs[a].channel, inputs[b].channel, inputs[a].x,
                                        inputs[b].x, wgt, grad);
        }
    }
    return value;
}

/// Gradient of nll with respect to the packed parameter vector.
inline VectorXd gradient(const KernelModel& model, const Dataset& data) {
    VectorXd g;
    value_and_gradient(model, data, g);
    return g;
}

struct TrainConfig {
    std::string algorithm = "adam";  // "adam" or "lbfgs"
    int max_iters = 500;
    double learning_rate = 0.02;
    double grad_tol = 1e-5;
    int lbfgs_memory = 10;
};

struct TrainReport {
    int iterations = 0;
    std::vector<double> nll_trace;   // best-seen objective, nonincreasing
    std::vector<double> obj_trace;   // raw objective per accepted iterate
    std::vector<double> grad_trace;
    double final_nll = 0.0;
    double grad_norm = 0.0;
    bool converged = false;
    double wall_time = 0.0;
};

namespace detail {

struct Objective {
    const Dataset& data;
    KernelModel& model;

    /// Returns false when the point is infeasible (non-finite or factorization failure).
    bool operator()(const VectorXd& v, double& f, VectorXd& g) {
        if (!v.allFinite()) return false;
        try {
            model.unpack(v);
            f = value_and_gradient(model, data, g);
        } catch (const FactorizationError&) {
            return false;
        }
        return std::isfinite(f) && g.allFinite();
    }
};

inline TrainReport run_adam(Objective& obj, VectorXd v, const TrainConfig& cfg,
                            VectorXd& v_best) {
    TrainReport rep;
    double f;
    VectorXd g;
    if (!obj(v, f, g))
        throw TrainingError("non-finite NLL at the initial point");
    double lr = cfg.learning_rate;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    VectorXd m = VectorXd::Zero(v.size()), s = VectorXd::Zero(v.size());
    double best = f;
    v_best = v;
    int rejections = 0;
    rep.obj_trace.push_back(f);
    rep.nll_trace.push_back(best);
    rep.grad_trace.push_back(g.norm());

    for (int it = 1; it <= cfg.max_iters; ++it) {
        rep.iterations = it;
        if (g.norm() < cfg.grad_tol) {
            rep.converged = true;
            break;
        }
        const VectorXd m_prev = m, s_prev = s;
        m = b1 * m + (1.0 - b1) * g;
        s = b2 * s + (1.0 - b2) * g.cwiseProduct(g);
        const double c1 = 1.0 - std::pow(b1, it);
        const double c2 = 1.0 - std::pow(b2, it);
        const VectorXd step =
            (m / c1).cwiseQuotient(((s / c2).cwiseSqrt().array() + eps).matrix());
        const VectorXd v_new = v - lr * step;

        double f_new;
        VectorXd g_new;
        if (!obj(v_new, f_new, g_new)) {
            m = m_prev;
            s = s_prev;
            lr *= 0.5;
            if (++rejections >= 10)
                throw TrainingError("optimizer aborted: 10 consecutive rejected steps");
            continue;
        }
        rejections = 0;
        // recover from rejection-halving once steps are accepted again, so an
        // early infeasible step does not cripple the rest of the run
        lr = std::min(cfg.learning_rate, 1.5 * lr);
        v = v_new;
        f = f_new;
        g = g_new;
        if (f < best) {
            best = f;
            v_best = v;
        }
        rep.obj_trace.push_back(f);
        rep.nll_trace.push_back(best);
        rep.grad_trace.push_back(g.norm());
    }
    rep.final_nll = best;
    rep.grad_norm = g.norm();
    return rep;
}

/// Strong Wolfe line search (c1 = 1e-4, c2 = 0.9) by bisection/backtracking.
inline bool wolfe_search(Objective& obj, const VectorXd& v, double f0, const VectorXd& g0,
                         const VectorXd& dir, VectorXd& v_out, double& f_out, VectorXd& g_out,
                         double& step_out) {
    const double c1 = 1e-4, c2 = 0.9;
    const double d0 = g0.dot(dir);
    if (d0 >= 0.0) return false;
    double lo = 0.0, hi = -1.0;  // hi < 0 means unbounded above
    double t = 1.0;
    double f_lo = f0;
    for (int k = 0; k < 40; ++k) {
        double ft;
        VectorXd gt;
        const VectorXd vt = v + t * dir;
        const bool ok = obj(vt, ft, gt);
        if (!ok || ft > f0 + c1 * t * d0 || (k > 0 && ft >= f_lo)) {
            hi = t;
        } else {
            const double dt = gt.dot(dir);
            if (std::abs(dt) <= -c2 * d0) {
                v_out = vt;
                f_out = ft;
                g_out = gt;
                step_out = t;
                return true;
            }
            if (dt >= 0.0) {
                hi = t;
            } else {
                lo = t;
                f_lo = ft;
            }
        }
        t = (hi > 0.0) ? 0.5 * (lo + hi) : 2.0 * t;
    }
    return false;
}

inline TrainReport run_lbfgs(Objective& obj, VectorXd v, const TrainConfig& cfg,
                             VectorXd& v_best) {
    TrainReport rep;
    double f;
    VectorXd g;
    if (!obj(v, f, g))
        throw TrainingError("non-finite NLL at the initial point");
    v_best = v;
    double best = f;
    rep.obj_trace.push_back(f);
    rep.nll_trace.push_back(best);
    rep.grad_trace.push_back(g.norm());

    std::deque<VectorXd> s_hist, y_hist;
    std::deque<double> rho_hist;
    int failures = 0;

    for (int it = 1; it <= cfg.max_iters; ++it) {
        rep.iterations = it;
        if (g.norm() < cfg.grad_tol) {
            rep.converged = true;
            break;
        }
        // two-loop recursion
        VectorXd q = g;
        std::vector<double> a(s_hist.size());
        for (int h = static_cast<int>(s_hist.size()) - 1; h >= 0; --h) {
            a[h] = rho_hist[h] * s_hist[h].dot(q);
            q -= a[h] * y_hist[h];
        }
        if (!s_hist.empty()) {
            const double gamma =
                s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
            q *= gamma;
        }
        for (size_t h = 0; h < s_hist.size(); ++h) {
            const double b = rho_hist[h] * y_hist[h].dot(q);
            q += (a[h] - b) * s_hist[h];
        }
        VectorXd dir = -q;

        VectorXd v_new, g_new;
        double f_new, step;
        if (!wolfe_search(obj, v, f, g, dir, v_new, f_new, g_new, step)) {
            // fall back to steepest descent once; give up if that fails too
            dir = -g;
            if (!wolfe_search(obj, v, f, g, dir, v_new, f_new, g_new, step)) {
                if (++failures >= 10)
                    throw TrainingError("optimizer aborted: repeated line-search failures");
                break;
            }
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }
        const VectorXd sv = v_new - v;
        const VectorXd yv = g_new - g;
        const double sy = sv.dot(yv);
        if (sy > 1e-12) {
            s_hist.push_back(sv);
            y_hist.push_back(yv);
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > cfg.lbfgs_memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        v = v_new;
        f = f_new;
        g = g_new;
        if (f < best) {
            best = f;
            v_best = v;
        }
        rep.obj_trace.push_back(f);
        rep.nll_trace.push_back(best);
        rep.grad_trace.push_back(g.norm());
    }
    rep.final_nll = best;
    rep.grad_norm = g.norm();
    return rep;
}

}  // namespace detail

/// Minimizes the NLL over the model's packed parameters; the model is left
/// at the best-seen point.
inline TrainReport optimize(KernelModel& model, const Dataset& data, const TrainConfig& cfg = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    detail::Objective obj{data, model};
    VectorXd v_best;
    TrainReport rep;
    if (cfg.algorithm == "adam") {
        rep = detail::run_adam(obj, model.pack(), cfg, v_best);
    } else if (cfg.algorithm == "lbfgs") {
        rep = detail::run_lbfgs(obj, model.pack(), cfg, v_best);
    } else {
        throw ConfigError("unknown optimizer algorithm: " + cfg.algorithm);
    }
    model.unpack(v_best);
    rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

}  // namespace mohsm
