#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "mohsm/spectral.hpp"

using namespace mohsm;

namespace {

VectorXd v1(double x) { return VectorXd::Constant(1, x); }

}  // namespace

TEST_SUITE_BEGIN("spectral");

TEST_CASE("spectral factor at the mean frequency has the expected phase and magnitude") {
    ChannelSpectralParams p;
    p.w = 1.0;
    p.mu = v1(2.0);
    p.sigma_diag = v1(1.0);
    p.theta = v1(0.25);
    p.phi = 0.0;
    // omega = omega' = mu: corr = 1, quad = 0, phase = theta * mu = 0.5
    const Complex r = spectral_factor(p, 0.5, v1(2.0), v1(2.0));
    CHECK(std::abs(r) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::arg(r) == doctest::Approx(-0.5).epsilon(1e-14));
}

TEST_CASE("rank-1 factorization: S_ij = conj(R_i) R_j times the shift phase") {
    std::mt19937_64 rng(41);
    testutil::SpecOptions o;
    o.P = 1;
    o.Q = 1;
    KernelSpec spec = testutil::random_spec(rng, o);
    const auto& chans = spec.shifts[0].components[0].channels;
    for (int t = 0; t < 200; ++t) {
        const VectorXd w = testutil::uni_vec(rng, 1, -4, 4);
        const VectorXd wp = testutil::uni_vec(rng, 1, -4, 4);
        const int i = static_cast<int>(rng() % 2), j = static_cast<int>(rng() % 2);
        const Complex s = spectral_density(spec, 0, 0, i, j, w, wp, false);
        const Complex ri = spectral_factor(chans[i], spec.shifts[0].ell[i], w, wp);
        const Complex rj = spectral_factor(chans[j], spec.shifts[0].ell[j], w, wp);
        const double shift_phase = -(w[0] - wp[0]) * spec.shifts[0].center[0];
        const Complex expect =
            std::conj(ri) * rj * Complex(std::cos(shift_phase), std::sin(shift_phase));
        REQUIRE(std::abs(s - expect) <= 1e-12 * std::max(1.0, std::abs(s)));
    }
}

TEST_CASE("symmetrized density satisfies the Hermitian reality condition") {
    std::mt19937_64 rng(43);
    KernelSpec spec = testutil::random_spec(rng);
    for (int t = 0; t < 100; ++t) {
        const VectorXd w = testutil::uni_vec(rng, 1, -4, 4);
        const VectorXd wp = testutil::uni_vec(rng, 1, -4, 4);
        const Complex s = spectral_density(spec, 0, 0, 0, 1, w, wp, true);
        const Complex sm = spectral_density(spec, 0, 0, 0, 1, -w, -wp, true);
        REQUIRE(std::abs(s - std::conj(sm)) <= 1e-13 * std::max(1.0, std::abs(s)));
    }
}

TEST_CASE("density is rejected in the stationary limit") {
    std::mt19937_64 rng(47);
    testutil::SpecOptions o;
    o.ell_lo = o.ell_hi = 0.0;
    KernelSpec spec = testutil::random_spec(rng, o);
    CHECK_THROWS_AS(spectral_density(spec, 0, 0, 0, 1, v1(1.0), v1(1.0), true),
                    InvalidParameterError);
}

TEST_CASE("oracle enforces its quadrature floor") {
    std::mt19937_64 rng(53);
    KernelSpec spec = testutil::random_spec(rng);
    QuadratureSpec quad;
    quad.nodes_per_axis = 100;
    CHECK_THROWS_AS(spectral_transform_oracle(spec, 0, 0, 0.0, 0.0, quad),
                    InvalidParameterError);
}

TEST_CASE("duality: closed form equals the transform oracle on a spot grid") {
    std::mt19937_64 rng(59);
    KernelSpec spec = testutil::random_spec(rng);
    const VectorXd xs = VectorXd::LinSpaced(5, -1.5, 1.5);
    for (int i = 0; i < 2; ++i) {
        for (int j = i; j < 2; ++j) {
            const MatrixXd oracle = spectral_transform_oracle_grid(spec, i, j, xs, xs);
            MatrixXd closed(xs.size(), xs.size());
            for (int a = 0; a < xs.size(); ++a)
                for (int b = 0; b < xs.size(); ++b)
                    closed(a, b) = eval_mohsm(spec, v1(xs[a]), v1(xs[b]), i, j);
            const double scale = closed.cwiseAbs().maxCoeff();
            REQUIRE((closed - oracle).cwiseAbs().maxCoeff() <= 1e-3 * scale);
        }
    }
}

TEST_CASE("oracle quadrature tails: widening the grid does not change the value") {
    std::mt19937_64 rng(61);
    KernelSpec spec = testutil::random_spec(rng);
    QuadratureSpec wide;
    wide.range_factor = 1.4;
    wide.nodes_per_axis = 1100;
    const double base = spectral_transform_oracle(spec, 0, 1, 0.4, -0.3);
    const double wide_val = spectral_transform_oracle(spec, 0, 1, 0.4, -0.3, wide);
    CHECK(base == doctest::Approx(wide_val).epsilon(1e-4));
}

TEST_SUITE_END();
