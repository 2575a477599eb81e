#pragma once

#include <cstdint>

#include "qkd/bitvec.hpp"
#include "qkd/rng.hpp"

namespace qkd {

// Seed bits for a Toeplitz matrix mapping n bits to l bits. The bits are
// expanded from (prng_seed, counter) so a round is reproducible from the
// PA_SEED message alone.
struct ToeplitzSeed {
    BitVec bits;  // length n + l - 1
    uint32_t prng_id = 0;  // 0 = xoshiro256** keyed by splitmix64(prng_seed + counter)
    uint64_t prng_seed = 0;
    uint64_t counter = 0;
};

ToeplitzSeed make_toeplitz_seed(uint64_t prng_seed, uint64_t counter, size_t n, size_t l);

// out_i = xor_j seed[i - j + n - 1] * key_j. The matrix is constant along
// diagonals, so the product is a slice of the GF(2) polynomial product of
// seed and key; computed word-wise with carry-less multiplication.
BitVec toeplitz_hash(const BitVec& key, const BitVec& seed_bits, size_t l);

inline BitVec toeplitz_hash(const BitVec& key, const ToeplitzSeed& seed, size_t l) {
    return toeplitz_hash(key, seed.bits, l);
}

// GF(2) polynomial product, low (na+nb-1) bits. Exposed for reuse and tests.
BitVec gf2_polymul(const BitVec& a, const BitVec& b);

struct PaRoundResult {
    ToeplitzSeed seed;
    BitVec alice_secret;
    BitVec bob_secret;
};

// One local privacy-amplification round: draw a seed, hash both keys.
// l = 0 yields empty secrets; the round is still counted by the caller.
PaRoundResult pa_round(const BitVec& alice_key, const BitVec& bob_key, size_t l, Rng& rng);

}  // namespace qkd
