#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qkd/photonics.hpp"
#include "qkd/sift.hpp"

using namespace qkd;

TEST_CASE("empty event list gives all-zero stats") {
    const SiftedStats s = sift({}, {});
    for (int b = 0; b < 2; ++b)
        for (int k = 0; k < 2; ++k) {
            CHECK(s.n[b][k] == 0);
            CHECK(s.m[b][k] == 0);
        }
    CHECK(s.raw_key_alice.empty());
}

TEST_CASE("single matching Z event fills the raw keys") {
    PulseRecord r;
    r.slot = 42;
    r.basis = Basis::Z;
    r.bit = 1;
    r.intensity = Intensity::Decoy;
    DetectionEvent e;
    e.slot = 42;
    e.basis = Basis::Z;
    e.bit = 1;
    const SiftedStats s = sift({r}, {e});
    CHECK(s.n[int(Basis::Z)][int(Intensity::Decoy)] == 1);
    CHECK(s.m[int(Basis::Z)][int(Intensity::Decoy)] == 0);
    CHECK(s.raw_key_alice.size() == 1);
    CHECK(s.raw_key_alice.get(0) == true);
    CHECK(s.raw_key_bob.get(0) == true);
}

TEST_CASE("basis mismatches are discarded, everything else tallied") {
    std::vector<PulseRecord> recs;
    std::vector<DetectionEvent> evs;
    Rng rng(3);
    uint64_t mismatches = 0;
    for (uint64_t i = 0; i < 10000; ++i) {
        PulseRecord r;
        r.slot = i;
        r.basis = rng.bernoulli(0.5) ? Basis::X : Basis::Z;
        r.bit = r.basis == Basis::Z ? uint8_t(rng.bernoulli(0.5)) : 0;
        r.intensity = rng.bernoulli(0.5) ? Intensity::Signal : Intensity::Decoy;
        DetectionEvent e;
        e.slot = i;
        e.basis = rng.bernoulli(0.5) ? Basis::X : Basis::Z;
        e.bit = uint8_t(rng.bernoulli(0.5));
        mismatches += e.basis != r.basis;
        recs.push_back(r);
        evs.push_back(e);
    }
    const SiftedStats s = sift(recs, evs);
    uint64_t kept = 0;
    for (int b = 0; b < 2; ++b)
        for (int k = 0; k < 2; ++k) kept += s.n[b][k];
    CHECK(kept + mismatches == evs.size());
    CHECK(s.raw_key_alice.size() == s.raw_key_bob.size());
    CHECK(s.raw_key_alice.size() == s.n_total(Basis::Z));
}

TEST_CASE("an event without a record is a desynchronization error") {
    DetectionEvent e;
    e.slot = 7;
    CHECK_THROWS_AS(sift({}, {e}), ProtocolError);
}

TEST_CASE("announcements never carry Z-basis bit values") {
    std::vector<DetectionEvent> evs(3);
    evs[0] = {1, Basis::Z, 1, 1, false};
    evs[1] = {2, Basis::X, 1, 1, false};
    evs[2] = {3, Basis::Z, 0, 0, false};
    const BasisAnnounce ann = make_announcement(evs);
    CHECK(ann.entries[0].x_outcome == kNoBit);
    CHECK(ann.entries[1].x_outcome == 1);
    CHECK(ann.entries[2].x_outcome == kNoBit);
}

TEST_CASE("announcement round trip: zero detections") {
    const BasisAnnounce ann = make_announcement({});
    CHECK(ann.entries.empty());
    PulseStore store;
    SiftedStats stats;
    const SiftReply reply = alice_process_announcement(ann, store, stats);
    CHECK(reply.entries.empty());
}

TEST_CASE("announcement round trip: keep on agreement, discard on mismatch") {
    PulseStore store;
    PulseRecord rz;
    rz.slot = 42;
    rz.basis = Basis::Z;
    rz.bit = 1;
    rz.intensity = Intensity::Signal;
    PulseRecord rx;
    rx.slot = 43;
    rx.basis = Basis::X;
    rx.intensity = Intensity::Decoy;
    store.add(rz);
    store.add(rx);

    std::vector<DetectionEvent> evs(2);
    evs[0] = {42, Basis::Z, 0, 0, false};  // bases agree
    evs[1] = {43, Basis::Z, 1, 1, false};  // Bob measured Z, Alice sent X
    SiftedStats alice;
    const SiftReply reply = alice_process_announcement(make_announcement(evs), store, alice);
    REQUIRE(reply.entries.size() == 2);
    CHECK(reply.entries[0].keep == 1);
    CHECK(reply.entries[0].intensity == kNoBit);  // Z keeps carry no label
    CHECK(reply.entries[1].keep == 0);

    SiftedStats bob;
    bob_apply_reply(evs, reply, bob);
    CHECK(bob.raw_key_bob.size() == 1);
    CHECK(bob.raw_key_bob.get(0) == false);
    CHECK(alice.raw_key_alice.get(0) == true);  // the actual error is caught by Cascade
}

TEST_CASE("X keeps carry the intensity label and error tallies agree") {
    PulseStore store;
    PulseRecord rx;
    rx.slot = 5;
    rx.basis = Basis::X;
    rx.intensity = Intensity::Decoy;
    store.add(rx);
    std::vector<DetectionEvent> evs(1);
    evs[0] = {5, Basis::X, 1, 1, false};  // |-> outcome
    SiftedStats alice;
    const SiftReply reply = alice_process_announcement(make_announcement(evs), store, alice);
    CHECK(reply.entries[0].keep == 1);
    CHECK(reply.entries[0].intensity == uint8_t(Intensity::Decoy));
    CHECK(alice.m[int(Basis::X)][int(Intensity::Decoy)] == 1);

    SiftedStats bob;
    bob_apply_reply(evs, reply, bob);
    CHECK(bob.n[int(Basis::X)][int(Intensity::Decoy)] == 1);
    CHECK(bob.m[int(Basis::X)][int(Intensity::Decoy)] == 1);
}

TEST_CASE("wire-path sifting reproduces the full-knowledge sift") {
    Config cfg;
    cfg.channel.fiber_length = 2;
    cfg.feedback_enabled = false;
    cfg.channel.misalignment_angle0 = 0.1;
    DetectionSampler sampler(cfg, 99);

    std::vector<PulseRecord> recs;
    std::vector<DetectionEvent> evs;
    for (int i = 0; i < 30000; ++i) {
        auto d = sampler.next(UINT64_MAX);
        REQUIRE(d);
        recs.push_back(d->pulse);
        evs.push_back(d->event);
    }
    const SiftedStats direct = sift(recs, evs);

    PulseStore store;
    for (const auto& r : recs) store.add(r);
    SiftedStats alice, bob;
    const SiftReply reply = alice_process_announcement(make_announcement(evs), store, alice);
    bob_apply_reply(evs, reply, bob);

    for (int k = 0; k < 2; ++k) {
        CHECK(alice.n[int(Basis::Z)][k] == direct.n[int(Basis::Z)][k]);
        CHECK(alice.n[int(Basis::X)][k] == direct.n[int(Basis::X)][k]);
        CHECK(alice.m[int(Basis::X)][k] == direct.m[int(Basis::X)][k]);
        CHECK(bob.n[int(Basis::X)][k] == direct.n[int(Basis::X)][k]);
        CHECK(bob.m[int(Basis::X)][k] == direct.m[int(Basis::X)][k]);
    }
    CHECK(alice.raw_key_alice == direct.raw_key_alice);
    CHECK(bob.raw_key_bob == direct.raw_key_bob);
}

TEST_CASE("kept Z fraction and Z error rate follow the physics") {
    Config cfg;
    cfg.channel.fiber_length = 0;
    cfg.channel.extra_loss = 13;
    cfg.detector.dead_time = 0;
    cfg.detector.dark_rate = 0;
    cfg.channel.misalignment_angle0 = 0.1;
    cfg.feedback_enabled = false;
    DetectionSampler sampler(cfg, 12345);

    std::vector<PulseRecord> recs;
    std::vector<DetectionEvent> evs;
    for (int i = 0; i < 100000; ++i) {
        auto d = sampler.next(UINT64_MAX);
        REQUIRE(d);
        recs.push_back(d->pulse);
        evs.push_back(d->event);
    }
    const SiftedStats s = sift(recs, evs);

    // multi-photon pulses bias the kept fraction only at second order here
    const double p_keep_z = (1 - cfg.protocol.p_x_alice) * (1 - cfg.protocol.p_x_bob);
    const double sigma = std::sqrt(p_keep_z * (1 - p_keep_z) * double(evs.size()));
    CHECK(std::abs(double(s.n_total(Basis::Z)) - p_keep_z * double(evs.size())) < 4 * sigma);

    const double e_expected = std::sin(0.1) * std::sin(0.1) + 0.01;  // 20 dB floor
    const double nz = double(s.n_total(Basis::Z));
    const double sig_e = std::sqrt(e_expected * (1 - e_expected) * nz);
    CHECK(std::abs(double(s.m_total(Basis::Z)) - e_expected * nz) < 3 * sig_e + 1e-9);
}
