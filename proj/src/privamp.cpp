#include "qkd/privamp.hpp"

#include <algorithm>
#include <stdexcept>

#if defined(__PCLMUL__)
#include <wmmintrin.h>
#endif

namespace qkd {

namespace {

#if defined(__PCLMUL__)
inline void clmul64(uint64_t a, uint64_t b, uint64_t& lo, uint64_t& hi) {
    const __m128i r = _mm_clmulepi64_si128(_mm_set_epi64x(0, int64_t(a)),
                                           _mm_set_epi64x(0, int64_t(b)), 0x00);
    lo = uint64_t(_mm_cvtsi128_si64(r));
    hi = uint64_t(_mm_cvtsi128_si64(_mm_srli_si128(r, 8)));
}
#else
inline void clmul64(uint64_t a, uint64_t b, uint64_t& lo, uint64_t& hi) {
    lo = hi = 0;
    while (b) {
        const int i = std::countr_zero(b);
        b &= b - 1;
        lo ^= a << i;
        if (i) hi ^= a >> (64 - i);
    }
}
#endif

// Product words restricted to [word_lo, word_hi]; pruning matters when only
// the middle slice of the convolution is needed.
std::vector<uint64_t> polymul_words(const std::vector<uint64_t>& a, const std::vector<uint64_t>& b,
                                    size_t word_lo, size_t word_hi) {
    std::vector<uint64_t> r(word_hi + 2, 0);
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i] == 0) continue;
        const size_t j_begin = word_lo > i + 1 ? word_lo - 1 - i : 0;
        if (j_begin >= b.size()) continue;
        const size_t j_end = std::min(b.size(), word_hi >= i ? word_hi - i + 1 : 0);
        for (size_t j = j_begin; j < j_end; ++j) {
            if (b[j] == 0) continue;
            uint64_t lo, hi;
            clmul64(a[i], b[j], lo, hi);
            r[i + j] ^= lo;
            r[i + j + 1] ^= hi;
        }
    }
    return r;
}

}  // namespace

BitVec gf2_polymul(const BitVec& a, const BitVec& b) {
    if (a.empty() || b.empty()) return BitVec();
    const size_t n_bits = a.size() + b.size() - 1;
    const size_t n_words = (n_bits + 63) / 64;
    auto words = polymul_words(a.words(), b.words(), 0, n_words - 1);
    BitVec out(n_bits);
    for (size_t i = 0; i < n_bits; ++i)
        if ((words[i >> 6] >> (i & 63)) & 1) out.set(i, true);
    return out;
}

ToeplitzSeed make_toeplitz_seed(uint64_t prng_seed, uint64_t counter, size_t n, size_t l) {
    ToeplitzSeed s;
    s.prng_seed = prng_seed;
    s.counter = counter;
    uint64_t mix = prng_seed + 0x9e3779b97f4a7c15ULL * (counter + 1);
    Rng rng(splitmix64(mix));
    s.bits = l == 0 ? BitVec() : BitVec::random(rng, n + l - 1);
    return s;
}

BitVec toeplitz_hash(const BitVec& key, const BitVec& seed_bits, size_t l) {
    const size_t n = key.size();
    if (l == 0) return BitVec();
    if (l > n) throw std::invalid_argument("toeplitz_hash: output longer than input");
    if (seed_bits.size() != n + l - 1)
        throw std::invalid_argument("toeplitz_hash: seed length must be n + l - 1");

    // output bit i = product bit (n - 1 + i)
    const size_t bit_lo = n - 1, bit_hi = n - 1 + (l - 1);
    auto words = polymul_words(seed_bits.words(), key.words(), bit_lo >> 6, bit_hi >> 6);
    BitVec out(l);
    for (size_t i = 0; i < l; ++i) {
        const size_t b = bit_lo + i;
        if ((words[b >> 6] >> (b & 63)) & 1) out.set(i, true);
    }
    return out;
}

PaRoundResult pa_round(const BitVec& alice_key, const BitVec& bob_key, size_t l, Rng& rng) {
    if (alice_key.size() != bob_key.size())
        throw std::invalid_argument("pa_round: key length mismatch");
    PaRoundResult r;
    r.seed = make_toeplitz_seed(rng.next_u64(), 0, alice_key.size(), l);
    if (l == 0) return r;
    r.alice_secret = toeplitz_hash(alice_key, r.seed, l);
    r.bob_secret = toeplitz_hash(bob_key, r.seed, l);
    return r;
}

}  // namespace qkd
