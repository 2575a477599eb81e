#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qkd/config.hpp"
#include "qkd/rng.hpp"

using namespace qkd;

TEST_CASE("stock defaults") {
    const Config cfg = load_config("{}");
    CHECK(cfg.protocol.rep_rate == doctest::Approx(6.25e8));
    CHECK(cfg.protocol.p_x_alice == doctest::Approx(0.125));
    CHECK(cfg.protocol.p_x_bob == doctest::Approx(0.5));
    CHECK(cfg.protocol.n_z_ec == 8192);
    CHECK(cfg.protocol.n_z_pa == 8192000);
    CHECK(cfg.detector.dark_rate == doctest::Approx(10.0));
    CHECK(cfg.detector.dead_time == doctest::Approx(30e-6));
    CHECK(cfg.detector.pbs_extinction == doctest::Approx(20.0));
    CHECK(cfg.security.eps_sec == doctest::Approx(1e-9));
    CHECK(cfg.security.eps_cor == doctest::Approx(1e-15));
    CHECK(cfg.channel.attenuation == doctest::Approx(0.2));
}

TEST_CASE("intensity ordering is enforced") {
    CHECK_THROWS_WITH_AS(load_config(R"({"mu1": 0.14, "mu2": 0.33})"),
                         doctest::Contains("mu1 > mu2 violated"), ConfigError);
}

TEST_CASE("the 175 km operating point is accepted") {
    const Config cfg =
        load_config(R"({"fiber_length": 175, "mu1": 0.33, "mu2": 0.14, "p_mu1": 0.75})");
    CHECK(cfg.channel.fiber_length == doctest::Approx(175.0));
    CHECK(cfg.protocol.mu1 == doctest::Approx(0.33));
}

TEST_CASE("malformed JSON is a parse error") {
    CHECK_THROWS_WITH_AS(load_config("{"), doctest::Contains("parse error"), ConfigError);
    CHECK_THROWS_AS(load_config("[1,2]"), ConfigError);
}

TEST_CASE("unknown keys are rejected") {
    CHECK_THROWS_WITH_AS(load_config(R"({"mu_3": 0.1})"),
                         doctest::Contains("unknown config key"), ConfigError);
}

TEST_CASE("field invariants are validated with the field named") {
    CHECK_THROWS_WITH_AS(load_config(R"({"p_mu1": 1.5})"), doctest::Contains("p_mu1"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(load_config(R"({"eps_sec": 2.0})"), doctest::Contains("eps_sec"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(load_config(R"({"n_z_pa": 1000})"),
                         doctest::Contains("multiple of n_z_ec"), ConfigError);
    CHECK_THROWS_WITH_AS(load_config(R"({"efficiency": 1.2})"), doctest::Contains("efficiency"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(load_config(R"({"pbs_extinction": 0})"),
                         doctest::Contains("pbs_extinction"), ConfigError);
}

TEST_CASE("load after save is the identity on validated sets") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        Config a;
        a.protocol.mu2 = 0.05 + 0.3 * rng.uniform();
        a.protocol.mu1 = a.protocol.mu2 + 0.05 + 0.5 * rng.uniform();
        a.protocol.p_mu1 = 0.1 + 0.8 * rng.uniform();
        a.channel.fiber_length = 250.0 * rng.uniform();
        a.channel.extra_loss = 5.0 * rng.uniform();
        a.detector.efficiency = rng.uniform();
        a.security.eps_sec = std::pow(10.0, -3.0 - 9.0 * rng.uniform());
        a.double_click_random = rng.bernoulli(0.5);
        const Config b = load_config(save_config(a));
        CHECK(b.protocol.mu1 == a.protocol.mu1);
        CHECK(b.protocol.mu2 == a.protocol.mu2);
        CHECK(b.protocol.p_mu1 == a.protocol.p_mu1);
        CHECK(b.channel.fiber_length == a.channel.fiber_length);
        CHECK(b.channel.extra_loss == a.channel.extra_loss);
        CHECK(b.detector.efficiency == a.detector.efficiency);
        CHECK(b.security.eps_sec == a.security.eps_sec);
        CHECK(b.double_click_random == a.double_click_random);
    }
}

TEST_CASE("effective transmittance") {
    ChannelParams ch;
    ch.fiber_length = 0;
    ch.extra_loss = 0;
    CHECK(effective_transmittance(ch) == doctest::Approx(1.0));

    ch.fiber_length = 100;
    CHECK(effective_transmittance(ch) == doctest::Approx(0.01));

    ch.fiber_length = 200;
    CHECK(effective_transmittance(ch) == doctest::Approx(1e-4));
}

TEST_CASE("transmittance decreases with length and attenuation") {
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
        ChannelParams ch;
        ch.fiber_length = 300.0 * rng.uniform();
        ch.attenuation = 0.5 * rng.uniform();
        ch.extra_loss = 5.0 * rng.uniform();
        ChannelParams longer = ch;
        longer.fiber_length += 1e-3 + 50.0 * rng.uniform();
        ChannelParams lossier = ch;
        lossier.attenuation += 1e-4 + 0.2 * rng.uniform();
        CHECK(effective_transmittance(longer) < effective_transmittance(ch));
        CHECK(effective_transmittance(lossier) <= effective_transmittance(ch));
    }
}
