#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "helpers.hpp"
#include "mohsm/gp.hpp"
#include "mohsm/kernels.hpp"
#include "mohsm/models.hpp"

using namespace mohsm;

namespace {

VectorXd v1(double x) { return VectorXd::Constant(1, x); }

KernelSpec equal_channel_spec(double ell) {
    std::mt19937_64 rng(7);
    testutil::SpecOptions o;
    o.ell_lo = o.ell_hi = ell;
    KernelSpec spec = testutil::random_spec(rng, o);
    // make both channels identical
    auto& chans = spec.shifts[0].components[0].channels;
    chans[1] = chans[0];
    spec.shifts[0].ell[1] = spec.shifts[0].ell[0];
    return spec;
}

}  // namespace

TEST_SUITE_BEGIN("kernels");

TEST_CASE("cross params of identical channels reduce to the marginals") {
    KernelSpec spec = equal_channel_spec(0.5);
    const auto& ch = spec.shifts[0].components[0].channels[0];
    const CrossParams cp = cross_params(spec, 0, 0, 0, 1);
    CHECK(cp.sigma_ij[0] == doctest::Approx(ch.sigma_diag[0]).epsilon(1e-14));
    CHECK(cp.mu_ij[0] == doctest::Approx(ch.mu[0]).epsilon(1e-14));
    CHECK(cp.w_ij == doctest::Approx(ch.w * ch.w).epsilon(1e-14));
    CHECK(cp.theta_ij[0] == 0.0);
    CHECK(cp.phi_ij == 0.0);
    CHECK(cp.ell_ij == doctest::Approx(spec.shifts[0].ell[0]).epsilon(1e-14));
}

TEST_CASE("cross sigma and mu are the harmonic/precision-weighted combinations") {
    std::mt19937_64 rng(3);
    KernelSpec spec = testutil::random_spec(rng);
    auto& a = spec.shifts[0].components[0].channels[0];
    auto& b = spec.shifts[0].components[0].channels[1];
    a.sigma_diag[0] = 1.0;
    b.sigma_diag[0] = 3.0;
    a.mu[0] = 2.0;
    b.mu[0] = 6.0;
    const CrossParams cp = cross_params(spec, 0, 0, 0, 1);
    CHECK(cp.sigma_ij[0] == doctest::Approx(2.0 * 1.0 * 3.0 / 4.0).epsilon(1e-15));
    CHECK(cp.mu_ij[0] == doctest::Approx((1.0 * 6.0 + 3.0 * 2.0) / 4.0).epsilon(1e-15));
    // cross magnitude shrinks as the spectral means separate
    const double w_near = cp.w_ij;
    b.mu[0] = 20.0;
    const double w_far = cross_params(spec, 0, 0, 0, 1).w_ij;
    CHECK(w_far < w_near);
    CHECK(w_far == doctest::Approx(a.w * b.w * std::exp(-0.25 * 18.0 * 18.0 / 4.0)));
}

TEST_CASE("ell_ij is zero only when both channel lengthscales are zero") {
    std::mt19937_64 rng(5);
    KernelSpec spec = testutil::random_spec(rng);
    spec.shifts[0].ell[0] = 0.0;
    spec.shifts[0].ell[1] = 0.5;
    CHECK(cross_params(spec, 0, 0, 0, 1).ell_ij == 0.0);
    spec.shifts[0].ell[1] = 0.0;
    CHECK(cross_params(spec, 0, 0, 0, 1).ell_ij == 0.0);
    spec.shifts[0].ell[0] = 0.4;
    spec.shifts[0].ell[1] = 0.4;
    CHECK(cross_params(spec, 0, 0, 0, 1).ell_ij == doctest::Approx(0.4).epsilon(1e-14));
}

TEST_CASE("stationary limit: eval_mohsm with all ell = 0 equals eval_mosm") {
    std::mt19937_64 rng(11);
    testutil::SpecOptions o;
    o.ell_lo = o.ell_hi = 0.0;
    o.P = 2;
    o.Q = 2;
    KernelSpec spec = testutil::random_spec(rng, o);
    for (int t = 0; t < 1000; ++t) {
        const VectorXd x = testutil::uni_vec(rng, 1, -5.0, 5.0);
        const VectorXd xp = testutil::uni_vec(rng, 1, -5.0, 5.0);
        const int i = static_cast<int>(rng() % 2), j = static_cast<int>(rng() % 2);
        const double a = eval_mohsm(spec, x, xp, i, j);
        const double b = eval_mosm(spec, x, xp, i, j);
        REQUIRE(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
    }
}

TEST_CASE("multi-output symmetry: k_ij(x, x') = k_ji(x', x)") {
    std::mt19937_64 rng(13);
    testutil::SpecOptions o;
    o.P = 2;
    o.Q = 2;
    o.n_channels = 3;
    KernelSpec spec = testutil::random_spec(rng, o);
    for (int t = 0; t < 1000; ++t) {
        const VectorXd x = testutil::uni_vec(rng, 1, -5.0, 5.0);
        const VectorXd xp = testutil::uni_vec(rng, 1, -5.0, 5.0);
        const int i = static_cast<int>(rng() % 3), j = static_cast<int>(rng() % 3);
        REQUIRE(eval_mohsm(spec, x, xp, i, j) ==
                doctest::Approx(eval_mohsm(spec, xp, x, j, i)).epsilon(1e-12));
    }
}

TEST_CASE("window factor decays monotonically away from the shift center") {
    std::mt19937_64 rng(17);
    KernelSpec spec = testutil::random_spec(rng);
    const double c = spec.shifts[0].center[0];
    double prev = eval_mohsm(spec, v1(c), v1(c), 0, 0);
    for (int s = 1; s <= 8; ++s) {
        const double x = c + 0.7 * s;
        const double cur = eval_mohsm(spec, v1(x), v1(x), 0, 0);
        REQUIRE(cur < prev);
        prev = cur;
    }
}

TEST_CASE("diagonal value at the window center matches the alpha normalization") {
    KernelSpec spec = equal_channel_spec(0.5);
    const double c = spec.shifts[0].center[0];
    const CrossParams cp = cross_params(spec, 0, 0, 0, 0);
    CHECK(eval_mohsm(spec, v1(c), v1(c), 0, 0) == doctest::Approx(cp.alpha_ij).epsilon(1e-13));
}

TEST_CASE("PSD property: random MOHSM/MOSM Grams have nonnegative spectra") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        testutil::SpecOptions o;
        o.P = 1 + static_cast<int>(rng() % 2);
        o.Q = 1 + static_cast<int>(rng() % 2);
        o.n_channels = 2;
        o.psd_safe = true;
        if (trial % 2 == 0) o.ell_lo = o.ell_hi = 0.0;  // alternate MOSM-like specs
        KernelSpec spec = testutil::random_spec(rng, o);
        const bool stationary = (trial % 2 == 0);
        MohsmModel model(spec, stationary);
        std::vector<InputPoint> inputs;
        for (int a = 0; a < 30; ++a)
            inputs.push_back({static_cast<int>(rng() % 2), testutil::uni_vec(rng, 1, -4, 4)});
        const MatrixXd K = build_gram(model, inputs, inputs);
        const double min_eig = Eigen::SelfAdjointEigenSolver<MatrixXd>(K).eigenvalues().minCoeff();
        REQUIRE(min_eig >= -1e-8 * K.trace() / K.rows());
    }
}

TEST_CASE("HSM kernel: window and component arithmetic") {
    HsmComponent c;
    c.w = 2.0;
    c.ell = 3.0;
    c.center = v1(1.0);
    c.sigma_diag = v1(0.5);
    c.mu = v1(2.0);
    HsmParams params{{c}};
    // at x = x' = center: value is w
    CHECK(eval_hsm(params, v1(1.0), v1(1.0)) == doctest::Approx(2.0).epsilon(1e-15));
    // by-hand value at x = 2, x' = 0: tau = 2, xbar = 1 (window = 1)
    const double expect = 2.0 * std::exp(-0.5 * 0.5 * 4.0) * std::cos(2.0 * 2.0);
    CHECK(eval_hsm(params, v1(2.0), v1(0.0)) == doctest::Approx(expect).epsilon(1e-14));
    // moving xbar off-center engages the window
    const double off = eval_hsm(params, v1(4.0), v1(2.0));
    const double expect_off = expect * std::exp(-(3.0 - 1.0) * (3.0 - 1.0) / (2.0 * 9.0));
    CHECK(off == doctest::Approx(expect_off).epsilon(1e-14));
}

TEST_CASE("HSM validation rejects nonpositive parameters") {
    HsmComponent c;
    c.w = 1.0;
    c.ell = 0.0;
    c.center = v1(0.0);
    c.sigma_diag = v1(1.0);
    c.mu = v1(1.0);
    CHECK_THROWS_AS(HsmParams{{c}}.validate(), InvalidParameterError);
    c.ell = 1.0;
    c.sigma_diag = v1(-1.0);
    CHECK_THROWS_AS(HsmParams{{c}}.validate(), InvalidParameterError);
}

TEST_CASE("LMC combination is the mixing-weighted sum of latent kernels") {
    HsmComponent c;
    c.w = 1.0;
    c.ell = 5.0;
    c.center = v1(0.0);
    c.sigma_diag = v1(1.0);
    c.mu = v1(1.5);
    HsmParams lat{{c}};
    MatrixXd A(2, 1);
    A << 2.0, -1.0;
    const double kq = eval_hsm(lat, v1(0.3), v1(-0.4));
    CHECK(eval_lmc(A, {lat}, v1(0.3), v1(-0.4), 0, 1) == doctest::Approx(-2.0 * kq));
    CHECK(eval_lmc(A, {lat}, v1(0.3), v1(-0.4), 0, 0) == doctest::Approx(4.0 * kq));
}

TEST_CASE("PSD property: HSM and HSM-LMC Grams") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<HsmParams> chans(2);
        for (auto& ch : chans) {
            for (int q = 0; q < 2; ++q) {
                HsmComponent c;
                c.w = testutil::uni(rng, 0.5, 2.0);
                c.ell = testutil::uni(rng, 1.0, 5.0);
                c.center = v1(testutil::uni(rng, -2, 2));
                c.sigma_diag = v1(testutil::uni(rng, 0.3, 1.5));
                c.mu = v1(testutil::uni(rng, 0.5, 3.0));
                ch.components.push_back(std::move(c));
            }
        }
        VectorXd noise = testutil::uni_vec(rng, 2, 0.05, 0.2);
        HsmModel hsm(chans, noise, 1);
        MatrixXd A(2, 2);
        A << testutil::uni(rng, -1, 1), testutil::uni(rng, -1, 1), testutil::uni(rng, -1, 1),
            testutil::uni(rng, -1, 1);
        LmcModel lmc(A, chans, noise, 1);
        std::vector<InputPoint> inputs;
        for (int a = 0; a < 30; ++a)
            inputs.push_back({static_cast<int>(rng() % 2), testutil::uni_vec(rng, 1, -4, 4)});
        for (const KernelModel* m : {static_cast<const KernelModel*>(&hsm),
                                     static_cast<const KernelModel*>(&lmc)}) {
            const MatrixXd K = build_gram(*m, inputs, inputs);
            const double min_eig =
                Eigen::SelfAdjointEigenSolver<MatrixXd>(K).eigenvalues().minCoeff();
            REQUIRE(min_eig >= -1e-8 * std::max(K.trace(), 1e-12) / K.rows());
        }
    }
}

TEST_CASE("spec validation rejects bad inputs") {
    std::mt19937_64 rng(37);
    KernelSpec spec = testutil::random_spec(rng);
    KernelSpec bad = spec;
    bad.noise[0] = 0.0;
    CHECK_THROWS_AS(bad.validate(), InvalidParameterError);
    bad = spec;
    bad.shifts[0].ell[0] = -0.1;
    CHECK_THROWS_AS(bad.validate(), InvalidParameterError);
    bad = spec;
    bad.shifts[0].components[0].channels[0].sigma_diag[0] = -1.0;
    CHECK_THROWS_AS(bad.validate(), InvalidParameterError);
    CHECK_THROWS_AS(cross_params(spec, 3, 0, 0, 0), InvalidParameterError);
    CHECK_THROWS_AS(cross_params(spec, 0, 0, 0, 5), InvalidParameterError);
}

TEST_SUITE_END();
