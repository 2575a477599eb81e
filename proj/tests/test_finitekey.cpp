#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qkd/finitekey.hpp"
#include "qkd/rng.hpp"

using namespace qkd;

namespace {

ProtocolParams long_haul_point() {
    ProtocolParams p;
    p.mu1 = 0.33;
    p.mu2 = 0.14;
    p.p_mu1 = 0.75;
    return p;
}

IntensityTallies sample_tallies() {
    IntensityTallies t;
    t.n_z = {600000, 200000};
    t.n_x = {90000, 30000};
    t.m_x = {2500, 900};
    t.m_z_total = 16000;
    return t;
}

}  // namespace

TEST_CASE("tau values") {
    CHECK(tau(0, 0, 0, 0.3) == doctest::Approx(1.0));  // vacuum source
    CHECK(tau(0, 0.33, 0.14, 0.75) == doctest::Approx(0.756532358924).epsilon(1e-9));
    CHECK(tau(1, 0.33, 0.14, 0.75) == doctest::Approx(0.208361162263).epsilon(1e-9));
    // probabilities sum to one
    double sum = 0;
    for (int n = 0; n < 30; ++n) sum += tau(n, 0.33, 0.14, 0.75);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("hoeffding half-width") {
    CHECK(hoeffding_delta(0, 1e-10) == 0.0);
    CHECK(hoeffding_delta(1e6, 1e-10) == doctest::Approx(3393.07021221).epsilon(1e-9));
    // delta(4n) = 2 delta(n)
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
        const double n = 1 + 1e7 * rng.uniform();
        const double eps = std::pow(10.0, -2 - 10 * rng.uniform());
        CHECK(hoeffding_delta(4 * n, eps) == doctest::Approx(2 * hoeffding_delta(n, eps)));
    }
    CHECK_THROWS_AS(hoeffding_delta(-1, 1e-9), std::domain_error);
    CHECK_THROWS_AS(hoeffding_delta(10, 2.0), std::domain_error);
}

TEST_CASE("gamma correction clamps at the degenerate points") {
    CHECK(gamma_correction(1e-10, 0.0, 1e5, 1e5) == 0.0);
    CHECK(gamma_correction(1e-10, 1.0, 1e5, 1e5) == 0.0);
    CHECK(gamma_correction(1e-10, 0.1, 0, 1e5) == 0.0);
    CHECK(gamma_correction(1e-10, 0.1, 1e5, 1e5) > 0.0);
}

TEST_CASE("vacuum bounds: zero tallies and the doubled-error upper bound") {
    const ProtocolParams p = long_haul_point();
    SecurityParams sec;

    IntensityTallies zero;
    const FiniteKeyBounds b0 = compute_bounds(zero, p, sec);
    CHECK(b0.s_z0_low == 0.0);
    CHECK(b0.s_z0_high == 0.0);
    CHECK(b0.s_z1_low == 0.0);
    CHECK(b0.phi_z_high == 0.5);

    // m_Z = 100 with eps chosen so delta = 30: upper bound 2*130 = 260
    IntensityTallies t;
    t.n_z = {1e9, 1e9};  // no clamping at n_Z
    t.m_z_total = 100;
    SecurityParams s2;
    s2.eps_sec = 7.0 * std::exp(-18.0);  // eps' = e^-18, delta(100) = sqrt(50*18) = 30
    const FiniteKeyBounds b = compute_bounds(t, p, s2);
    CHECK(b.s_z0_high == doctest::Approx(260.0).epsilon(1e-9));

    // clamped at n_Z when errors dominate
    IntensityTallies tc;
    tc.n_z = {50, 30};
    tc.m_z_total = 80;
    const FiniteKeyBounds bc = compute_bounds(tc, p, sec);
    CHECK(bc.s_z0_high == doctest::Approx(80.0));
}

TEST_CASE("the vacuum lower bound never exceeds the vacuum upper bound") {
    // unphysical tallies (oversized decoy counts) would otherwise cross
    const ProtocolParams p = long_haul_point();
    IntensityTallies t;
    t.n_z = {600000, 200000};
    t.m_z_total = 16000;
    const FiniteKeyBounds b = compute_bounds(t, p, SecurityParams{});
    CHECK(b.s_z0_low <= b.s_z0_high);
}

TEST_CASE("degenerate intensities are rejected") {
    ProtocolParams p = long_haul_point();
    p.mu2 = p.mu1;
    CHECK_THROWS_AS(compute_bounds(sample_tallies(), p, SecurityParams{}), std::domain_error);
}

TEST_CASE("single-photon bound never increases when the vacuum cap grows") {
    const ProtocolParams p = long_haul_point();
    SecurityParams sec;
    IntensityTallies t = sample_tallies();
    double prev = -1;
    for (double m = 1000; m <= 60000; m += 1000) {
        t.m_z_total = m;
        const FiniteKeyBounds b = compute_bounds(t, p, sec);
        if (prev >= 0) CHECK(b.s_z1_low <= prev + 1e-9);
        prev = b.s_z1_low;
    }
}

TEST_CASE("phase error limits") {
    const ProtocolParams p = long_haul_point();
    SecurityParams sec;

    // plenty of X statistics and no X errors: phi near zero
    IntensityTallies t = sample_tallies();
    t.m_x = {0, 0};
    t.m_z_total = 0;
    const FiniteKeyBounds b = compute_bounds(t, p, sec);
    CHECK(b.v_x1_high == 0.0);
    CHECK(b.phi_z_high < 0.02);

    // no X statistics at all: maximal ignorance
    IntensityTallies t2;
    t2.n_z = {1e6, 3e5};
    const FiniteKeyBounds b2 = compute_bounds(t2, p, sec);
    CHECK(b2.phi_z_high == 0.5);
}

TEST_CASE("secret key length evaluates Eq-style formula with floor and clamp") {
    SecurityParams sec;  // 1e-9 / 1e-15

    FiniteKeyBounds b;
    b.s_z0_low = 1000;
    b.s_z1_low = 500000;
    b.phi_z_high = 0.05;
    CHECK(secret_key_length(b, 150000, sec) == 207620);

    FiniteKeyBounds zero;
    zero.phi_z_high = 0.5;
    CHECK(secret_key_length(zero, 0, sec) == 0);

    // the constant penalty alone: 4*log2(7e9) + log2(1e15) = 180.648
    FiniteKeyBounds c;
    c.s_z0_low = 1e6;
    c.s_z1_low = 0;
    c.phi_z_high = 0.5;
    CHECK(secret_key_length(c, 0, sec) == 999819);  // floor(1e6 - 180.648)
}

TEST_CASE("phi = 1/2 removes the single-photon term") {
    SecurityParams sec;
    FiniteKeyBounds b;
    b.s_z0_low = 5000;
    b.s_z1_low = 123456;
    b.phi_z_high = 0.5;
    FiniteKeyBounds b2 = b;
    b2.s_z1_low = 0;
    CHECK(secret_key_length(b, 100, sec) == secret_key_length(b2, 100, sec));
}

TEST_CASE("key length is monotone in the leak and the phase error") {
    SecurityParams sec;
    Rng rng(2);
    for (int i = 0; i < 200; ++i) {
        FiniteKeyBounds b;
        b.s_z0_low = 1e5 * rng.uniform();
        b.s_z1_low = 1e6 * rng.uniform();
        b.phi_z_high = 0.4 * rng.uniform();
        const double lam = 1e5 * rng.uniform();
        FiniteKeyBounds b_hi_phi = b;
        b_hi_phi.phi_z_high = b.phi_z_high + 0.05;
        CHECK(secret_key_length(b_hi_phi, lam, sec) <= secret_key_length(b, lam, sec));
        FiniteKeyBounds b2 = b;
        CHECK(secret_key_length(b2, lam * 1.5 + 10, sec) <= secret_key_length(b, lam, sec));
    }
}

TEST_CASE("bounds scale consistently with the tallies") {
    const ProtocolParams p = long_haul_point();
    SecurityParams sec;
    const IntensityTallies t = sample_tallies();
    IntensityTallies t2 = t;
    for (int k = 0; k < 2; ++k) {
        t2.n_z[k] *= 2;
        t2.n_x[k] *= 2;
        t2.m_x[k] *= 2;
    }
    t2.m_z_total *= 2;
    const FiniteKeyBounds a = compute_bounds(t, p, sec);
    const FiniteKeyBounds b = compute_bounds(t2, p, sec);
    CHECK(b.s_z0_low / a.s_z0_low == doctest::Approx(2.0).epsilon(0.02));
    CHECK(b.s_z1_low / a.s_z1_low == doctest::Approx(2.0).epsilon(0.02));
    CHECK(b.s_z0_high / a.s_z0_high == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("analytic rate model limits") {
    Config cfg;
    cfg.channel.fiber_length = 175;

    SUBCASE("opaque channel, no darks: zero rate") {
        Config c = cfg;
        c.channel.extra_loss = 500;
        c.detector.dark_rate = 0;
        CHECK(expected_rate_model(c).skr_bps == 0.0);
    }

    SUBCASE("rate is monotone between 150 and 200 km") {
        Config c150 = cfg, c200 = cfg;
        c150.channel.fiber_length = 150;
        c200.channel.fiber_length = 200;
        CHECK(expected_rate_model(c150).skr_bps > expected_rate_model(c200).skr_bps);
    }

    SUBCASE("175 km with the long-haul settings lands in the plausible band") {
        const RateModelResult r = expected_rate_model(cfg);  // defaults = 175 km point
        CHECK(r.skr_bps >= 100.0);
        CHECK(r.skr_bps <= 1000.0);
        CHECK(r.qber_z < 0.05);
    }
}

TEST_CASE("optimizer lands on sensible operating points") {
    Config cfg;

    SUBCASE("25 km optimum sits in the low-intensity saturation regime") {
        const OptimizeResult opt = optimize_params(25, cfg);
        Config ref = cfg;
        ref.channel.fiber_length = 25;
        ref.protocol.mu1 = 0.10;
        ref.protocol.mu2 = 0.06;
        ref.protocol.p_mu1 = 0.56;
        const double ref_rate = expected_rate_model(ref).skr_bps;
        CHECK(opt.skr_bps >= ref_rate);        // optimizer dominance
        CHECK(opt.skr_bps <= 2.0 * ref_rate);  // same regime, same ballpark
    }

    SUBCASE("175 km optimum dominates the stock long-haul settings") {
        const OptimizeResult opt = optimize_params(175, cfg);
        Config ref = cfg;
        ref.channel.fiber_length = 175;
        const double ref_rate = expected_rate_model(ref).skr_bps;  // 0.33/0.14/0.75
        CHECK(opt.skr_bps >= ref_rate * 0.999);
    }

    SUBCASE("300 km is dark-count dominated: zero rate") {
        const OptimizeResult opt = optimize_params(300, cfg);
        CHECK(opt.skr_bps == 0.0);
    }
}
