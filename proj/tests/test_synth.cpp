#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "mohsm/synth.hpp"

using namespace mohsm;

namespace {

VectorXd v1(double x) { return VectorXd::Constant(1, x); }

HsmParams unit_gaussian_generator() {
    // k(tau) ~ exp(-tau^2 / 2) with an effectively disabled window
    HsmComponent c;
    c.w = 1.0;
    c.ell = 1e6;
    c.center = v1(0.0);
    c.sigma_diag = v1(1.0);
    c.mu = v1(0.0);
    return HsmParams{{c}};
}

}  // namespace

TEST_SUITE_BEGIN("synth");

TEST_CASE("ground truth gram: zero delay duplicates the function channel") {
    SynthConfig cfg = SynthConfig::defaults();
    const VectorXd xs = VectorXd::LinSpaced(20, -20.0, 20.0);
    const MatrixXd K = ground_truth_gram(cfg.generator, 0.0, xs, cfg.step());
    const int N = 20;
    // channel 3 vs channel 3 equals channel 1 vs channel 1; cross likewise
    CHECK((K.block(2 * N, 2 * N, N, N) - K.block(0, 0, N, N)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((K.block(0, 2 * N, N, N) - K.block(0, 0, N, N)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("ground truth gram: derivative cross-block vanishes at tau = 0 for even kernels") {
    const HsmParams gen = unit_gaussian_generator();
    const VectorXd xs = VectorXd::LinSpaced(9, -4.0, 4.0);
    const MatrixXd K = ground_truth_gram(gen, 1.0, xs, 1e-4);
    const int N = 9;
    for (int a = 0; a < N; ++a)
        REQUIRE(std::abs(K(a, N + a)) < 1e-8);  // cov(f(x), f'(x))
}

TEST_CASE("ground truth gram: second-derivative block matches the symbolic value") {
    const HsmParams gen = unit_gaussian_generator();
    const VectorXd xs = VectorXd::LinSpaced(5, -2.0, 2.0);
    const MatrixXd K = ground_truth_gram(gen, 1.0, xs, 1e-4);
    const int N = 5;
    // d2k/dx dx' of exp(-tau^2/2) is (1 - tau^2) exp(-tau^2/2); at tau = 0 -> 1
    for (int a = 0; a < N; ++a)
        REQUIRE(K(N + a, N + a) == doctest::Approx(1.0).epsilon(1e-6));
    const double tau = xs[1] - xs[0];
    const double expect = (1.0 - tau * tau) * std::exp(-0.5 * tau * tau);
    CHECK(K(N, N + 1) == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("ground truth gram is symmetric PSD for the default configuration") {
    SynthConfig cfg = SynthConfig::defaults();
    cfg.n_points = 60;
    const VectorXd xs = VectorXd::LinSpaced(cfg.n_points, cfg.lo, cfg.hi);
    const MatrixXd K = ground_truth_gram(cfg.generator, cfg.delay, xs, cfg.step());
    CHECK((K - K.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    const double min_eig = Eigen::SelfAdjointEigenSolver<MatrixXd>(K).eigenvalues().minCoeff();
    CHECK(min_eig >= -1e-6 * K.trace() / K.rows());
}

TEST_CASE("generate is deterministic and respects the masks") {
    SynthConfig cfg = SynthConfig::defaults();
    cfg.n_points = 120;
    const SynthData a = generate(cfg);
    const SynthData b = generate(cfg);
    REQUIRE(a.train.size() == b.train.size());
    for (int k = 0; k < a.train.size(); ++k) {
        REQUIRE(a.train.points[k].y == b.train.points[k].y);
        REQUIRE(a.train.points[k].x[0] == b.train.points[k].x[0]);
    }
    // masked regions contain no training points in the masked channel
    for (const auto& p : a.train.points) {
        if (p.channel == 1) REQUIRE(!(p.x[0] >= -10.0 && p.x[0] <= -5.0));
        if (p.channel == 2) REQUIRE(!(p.x[0] >= -5.0 && p.x[0] <= 5.0));
    }
    // all 3 * n_points samples are accounted for
    CHECK(a.train.size() + a.test.size() == 3 * cfg.n_points);
    // a different seed produces different values
    cfg.seed += 1;
    const SynthData c = generate(cfg);
    CHECK(c.train.points[0].y != a.train.points[0].y);
}

TEST_CASE("generated derivative channel is consistent with the function channel") {
    SynthConfig cfg = SynthConfig::defaults();
    cfg.n_points = 200;
    const SynthData d = generate(cfg);
    // reconstruct the full per-channel series from train + test
    const int N = cfg.n_points;
    VectorXd f(N), df(N);
    f.setZero();
    df.setZero();
    auto fill = [&](const Dataset& ds) {
        for (const auto& p : ds.points) {
            const int idx = static_cast<int>(
                std::round((p.x[0] - cfg.lo) / (cfg.hi - cfg.lo) * (N - 1)));
            if (p.channel == 0) f[idx] = p.y;
            if (p.channel == 1) df[idx] = p.y;
        }
    };
    fill(d.train);
    fill(d.test);
    // df should match the central difference of f at interior grid points to
    // within the grid resolution (the draw used step 4e-3, the grid is 0.2)
    const double h = (cfg.hi - cfg.lo) / (N - 1);
    double worst = 0.0;
    for (int a = 1; a + 1 < N; ++a) {
        const double fd = (f[a + 1] - f[a - 1]) / (2.0 * h);
        worst = std::max(worst, std::abs(fd - df[a]));
    }
    // tolerance: grid-level finite differencing of a process whose dominant
    // angular frequency is ~4 (error factor ~ omega^3 h^2 / 6 per unit amplitude)
    CHECK(worst < 3.0);
}

TEST_CASE("empirical channel variance tracks the ground-truth diagonal (soft)") {
    SynthConfig cfg = SynthConfig::defaults();
    cfg.n_points = 300;
    cfg.seed = 12;
    const SynthData d = generate(cfg);
    const int N = cfg.n_points;
    // pooled over channels to dampen single-draw variance
    double emp = 0.0, truth = 0.0;
    int cnt = 0;
    auto acc = [&](const Dataset& ds, const std::vector<int>& idx) {
        for (size_t k = 0; k < ds.points.size(); ++k) {
            emp += ds.points[k].y * ds.points[k].y;
            truth += d.gram(idx[k], idx[k]);
            ++cnt;
        }
    };
    acc(d.train, d.train_idx);
    acc(d.test, d.test_idx);
    (void)N;
    emp /= cnt;
    truth /= cnt;
    CHECK(emp == doctest::Approx(truth).epsilon(0.5));
}

TEST_CASE("benchmark report is deterministic for a fixed seed") {
    SynthConfig cfg = SynthConfig::defaults();
    cfg.n_points = 60;
    cfg.seed = 3;
    BenchmarkOptions opts;
    opts.methods = {"mohsm"};
    opts.trials = 1;
    opts.train.max_iters = 5;
    const MetricReport a = run_benchmark(cfg, opts);
    const MetricReport b = run_benchmark(cfg, opts);
    REQUIRE(a.entries.size() == b.entries.size());
    REQUIRE(!a.entries.empty());
    CHECK(a.entries[0].mean == b.entries[0].mean);
    CHECK(a.failures.empty());
}

TEST_CASE("config validation rejects bad ranges") {
    SynthConfig cfg = SynthConfig::defaults();
    cfg.train_fraction = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = SynthConfig::defaults();
    cfg.mask_delay_hi = 100.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = SynthConfig::defaults();
    cfg.hi = cfg.lo;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_SUITE_END();
