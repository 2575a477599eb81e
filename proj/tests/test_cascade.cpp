#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "qkd/cascade.hpp"

using namespace qkd;

namespace {

// counts every parity bit served, independently of the driver's ledger
class MeteredChannel : public ParityChannel {
public:
    explicit MeteredChannel(BitVec alice_block) : inner_(std::move(alice_block)) {}
    BitVec open_pass(uint32_t pass, uint64_t perm_seed, uint32_t block_size) override {
        BitVec b = inner_.open_pass(pass, perm_seed, block_size);
        served += b.size();
        return b;
    }
    BitVec parities(uint32_t pass, const std::vector<ParityRange>& ranges) override {
        BitVec b = inner_.parities(pass, ranges);
        served += b.size();
        return b;
    }
    uint64_t served = 0;

private:
    LocalParityChannel inner_;
};

BitVec flip_random_bits(const BitVec& in, double q, Rng& rng, size_t* flipped = nullptr) {
    BitVec out = in;
    size_t count = 0;
    for (size_t i = 0; i < out.size(); ++i)
        if (rng.bernoulli(q)) {
            out.flip(i);
            ++count;
        }
    if (flipped) *flipped = count;
    return out;
}

}  // namespace

TEST_CASE("binary entropy") {
    CHECK(binary_entropy(0.0) == 0.0);
    CHECK(binary_entropy(1.0) == 0.0);
    CHECK(binary_entropy(0.5) == doctest::Approx(1.0));
    CHECK(binary_entropy(0.02) == doctest::Approx(0.141440542542).epsilon(1e-8));
    CHECK_THROWS_AS(binary_entropy(-0.1), std::domain_error);
    CHECK_THROWS_AS(binary_entropy(1.1), std::domain_error);
}

TEST_CASE("identical blocks cost exactly the first-pass parities") {
    Rng rng(1);
    const BitVec key = BitVec::random(rng, 8192);
    LocalParityChannel ch(key);
    Rng drng(2);
    const ECBlockResult res = cascade_correct(key, 0.02, ch, drng);
    CHECK(res.qber_estimate == 0.0);
    CHECK(res.corrected_bits == key);
    const uint32_t k1 = uint32_t(std::ceil(0.73 / 0.02));
    CHECK(res.leaked_bits == (8192 + k1 - 1) / k1);
    CHECK(res.passes == 1);
}

TEST_CASE("a single flipped bit is found within the binary-search budget") {
    Rng rng(3);
    const BitVec alice = BitVec::random(rng, 8192);
    BitVec bob = alice;
    bob.flip(4321);
    MeteredChannel ch(alice);
    Rng drng(4);
    const ECBlockResult res = cascade_correct(bob, 0.02, ch, drng);
    CHECK(res.corrected_bits == alice);
    CHECK(res.qber_estimate == doctest::Approx(1.0 / 8192));

    const uint32_t k1 = uint32_t(std::ceil(0.73 / 0.02));  // 37
    uint64_t tops = 0;
    for (uint32_t p = 0; p < 4; ++p) {
        const uint32_t bs = std::min(k1 << p, uint32_t(8192 / 2));
        tops += (8192 + bs - 1) / bs;
    }
    const uint64_t search = uint64_t(std::ceil(std::log2(double(k1))));
    CHECK(res.leaked_bits <= tops + search);
    CHECK(res.leaked_bits == ch.served);
}

TEST_CASE("random 2% blocks are fully corrected and the ledger is channel-accurate") {
    Rng rng(5);
    double f_sum = 0;
    const int blocks = 60;
    for (int b = 0; b < blocks; ++b) {
        const BitVec alice = BitVec::random(rng, 8192);
        size_t flipped = 0;
        const BitVec bob = flip_random_bits(alice, 0.02, rng, &flipped);
        MeteredChannel ch(alice);
        const ECBlockResult res = cascade_correct(bob, 0.02, ch, rng);
        CHECK(res.corrected_bits == alice);
        CHECK(res.leaked_bits == ch.served);
        CHECK(size_t(std::llround(res.qber_estimate * 8192)) == flipped);
        f_sum += double(res.leaked_bits) / (8192 * binary_entropy(0.02));
    }
    const double f_mean = f_sum / blocks;
    CHECK(f_mean >= 1.0);
    CHECK(f_mean <= 1.2);
}

TEST_CASE("efficiency stays in range across error rates") {
    Rng rng(6);
    for (double q : {0.01, 0.05}) {
        double f_sum = 0;
        const int blocks = 40;
        for (int b = 0; b < blocks; ++b) {
            const BitVec alice = BitVec::random(rng, 8192);
            const BitVec bob = flip_random_bits(alice, q, rng);
            LocalParityChannel ch(alice);
            const ECBlockResult res = cascade_correct(bob, q, ch, rng);
            CHECK(res.corrected_bits == alice);
            f_sum += double(res.leaked_bits) / (8192 * binary_entropy(q));
        }
        const double f_mean = f_sum / blocks;
        CHECK(f_mean >= 1.0);
        CHECK(f_mean <= 1.2);
    }
}

TEST_CASE("permuting both blocks the same way corrects the same number of errors") {
    Rng rng(7);
    const uint32_t n = 4096;
    const BitVec alice = BitVec::random(rng, n);
    const BitVec bob = flip_random_bits(alice, 0.03, rng);

    const auto perm = derive_permutation(n, 777);
    BitVec alice_p(n), bob_p(n);
    for (uint32_t i = 0; i < n; ++i) {
        alice_p.set(i, alice.get(perm[i]));
        bob_p.set(i, bob.get(perm[i]));
    }

    LocalParityChannel ch1(alice);
    Rng d1(42);
    const ECBlockResult r1 = cascade_correct(bob, 0.03, ch1, d1);
    LocalParityChannel ch2(alice_p);
    Rng d2(42);
    const ECBlockResult r2 = cascade_correct(bob_p, 0.03, ch2, d2);

    CHECK(r1.corrected_bits == alice);
    CHECK(r2.corrected_bits == alice_p);
    CHECK(r1.qber_estimate == doctest::Approx(r2.qber_estimate));
}

TEST_CASE("verification hash") {
    Rng rng(8);
    const BitVec a = BitVec::random(rng, 8192);

    SUBCASE("equal blocks always pass") {
        for (int i = 0; i < 100; ++i) CHECK(verify_block(a, a, rng.next_u64()).pass);
    }
    SUBCASE("one-bit differences are caught (no collision in 10^4 trials)") {
        int collisions = 0;
        for (int i = 0; i < 10000; ++i) {
            BitVec b = a;
            b.flip(rng.uniform_int(uint32_t(a.size())));
            if (verify_block(a, b, rng.next_u64()).pass) ++collisions;
        }
        CHECK(collisions == 0);
    }
    SUBCASE("hash budget covers the correctness parameter") {
        CHECK(uint32_t(std::ceil(std::log2(1e15))) == 50);  // eps_cor = 1e-15
        CHECK(kVerifyHashBits >= 50);
    }
}

TEST_CASE("leak ledger totals") {
    CHECK(leak_ledger_total({}) == 0);

    Rng rng(9);
    std::vector<ECBlockResult> results;
    uint64_t expected = 0;
    for (int b = 0; b < 5; ++b) {
        const BitVec key = BitVec::random(rng, 8192);
        LocalParityChannel ch(key);
        results.push_back(cascade_correct(key, 0.02, ch, rng));
        expected += results.back().leaked_bits + kVerifyHashBits;
    }
    CHECK(leak_ledger_total(results) == expected);

    // error-free blocks cost first-pass parities plus the hash, each
    const uint32_t k1 = uint32_t(std::ceil(0.73 / 0.02));
    CHECK(leak_ledger_total(results) == 5 * ((8192 + k1 - 1) / k1 + kVerifyHashBits));
}

TEST_CASE("the analytic leak formula reproduces the reference value") {
    CHECK(1.06 * 8192 * binary_entropy(0.02) == doctest::Approx(1228.20178).epsilon(1e-6));
}
