#include "qkd/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <stdexcept>

#include "qkd/errors.hpp"
#include "qkd/privamp.hpp"

namespace qkd {

double binary_entropy(double x) {
    if (x < 0.0 || x > 1.0) throw std::domain_error("binary_entropy: argument outside [0,1]");
    if (x <= 0.0 || x >= 1.0) return 0.0;
    return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

std::vector<uint32_t> derive_permutation(uint32_t n, uint64_t perm_seed) {
    std::vector<uint32_t> p(n);
    for (uint32_t i = 0; i < n; ++i) p[i] = i;
    if (perm_seed == 0) return p;  // identity: first pass
    Rng rng(perm_seed);
    for (uint32_t i = n - 1; i > 0; --i) std::swap(p[i], p[rng.uniform_int(i + 1)]);
    return p;
}

BlockParityServer::BlockParityServer(BitVec block) : block_(std::move(block)) {}

BitVec BlockParityServer::open_pass(uint32_t pass, uint64_t perm_seed, uint32_t block_size) {
    const uint32_t n = uint32_t(block_.size());
    if (block_size == 0 || block_size > n)
        throw ProtocolError("cascade: bad block size in pass announcement");
    const auto perm = derive_permutation(n, perm_seed);
    PassView v;
    v.block_size = block_size;
    v.prefix.resize(n + 1);
    v.prefix[0] = 0;
    for (uint32_t i = 0; i < n; ++i)
        v.prefix[i + 1] = uint8_t(v.prefix[i] ^ uint8_t(block_.get(perm[i])));
    const auto& pv = (passes_[pass] = std::move(v));

    const uint32_t nb = (n + block_size - 1) / block_size;
    BitVec out(nb);
    for (uint32_t b = 0; b < nb; ++b) {
        const uint32_t s = b * block_size, e = std::min(n, s + block_size);
        out.set(b, pv.prefix[e] ^ pv.prefix[s]);
    }
    return out;
}

BitVec BlockParityServer::parities(uint32_t pass, const std::vector<ParityRange>& ranges) const {
    auto it = passes_.find(pass);
    if (it == passes_.end()) throw ProtocolError("cascade: parity request for unopened pass");
    const auto& pv = it->second;
    BitVec out(ranges.size());
    for (size_t i = 0; i < ranges.size(); ++i) {
        const auto& r = ranges[i];
        if (r.len == 0 || uint64_t(r.start) + r.len > pv.prefix.size() - 1)
            throw ProtocolError("cascade: parity range out of bounds");
        out.set(i, pv.prefix[r.start + r.len] ^ pv.prefix[r.start]);
    }
    return out;
}

namespace {

struct PassState {
    uint32_t block_size = 0;
    std::vector<uint32_t> perm;
    std::vector<uint32_t> inv;
};

inline uint64_t range_key(uint32_t start, uint32_t len) {
    return (uint64_t(start) << 32) | len;
}

}  // namespace

ECBlockResult cascade_correct(const BitVec& bob_block, double q_initial, ParityChannel& ch,
                              Rng& rng) {
    const uint32_t n = uint32_t(bob_block.size());
    if (n < 16) throw std::invalid_argument("cascade_correct: block too short");
    if (!(q_initial > 0.0 && q_initial < 0.5))
        throw std::invalid_argument("cascade_correct: q_initial outside (0, 0.5)");

    BitVec bob = bob_block;
    uint64_t leaked = 0;
    uint32_t corrected = 0;

    const uint32_t k1 =
        std::clamp(uint32_t(std::ceil(0.73 / q_initial)), uint32_t(8), n / 2);

    std::vector<PassState> passes;
    std::vector<std::unordered_map<uint64_t, bool>> alice;  // learned + inferred parities

    auto bob_parity = [&](uint32_t p, uint32_t start, uint32_t len) {
        const auto& perm = passes[p].perm;
        bool par = false;
        for (uint32_t i = 0; i < len; ++i) par ^= bob.get(perm[start + i]);
        return par;
    };
    auto alice_cached = [&](uint32_t p, uint32_t start, uint32_t len) -> std::optional<bool> {
        auto it = alice[p].find(range_key(start, len));
        if (it == alice[p].end()) return std::nullopt;
        return it->second;
    };
    auto alice_request = [&](uint32_t p, uint32_t start, uint32_t len) {
        const bool v = ch.parities(p, {{start, len}}).get(0);
        leaked += 1;
        alice[p][range_key(start, len)] = v;
        return v;
    };

    auto block_range = [&](uint32_t p, uint32_t b) -> ParityRange {
        const uint32_t s = b * passes[p].block_size;
        return {s, std::min(passes[p].block_size, n - s)};
    };

    // (pass, block) pairs whose Alice parity is known and currently differs
    std::set<std::pair<uint32_t, uint32_t>> pending;
    auto enqueue_if_mismatch = [&](uint32_t p, uint32_t b) {
        const auto r = block_range(p, b);
        const auto a = alice_cached(p, r.start, r.len);
        if (a && *a != bob_parity(p, r.start, r.len)) pending.insert({p, b});
    };

    auto search_and_flip = [&](uint32_t p, uint32_t b) {
        auto [start, len] = block_range(p, b);
        bool a_cur = *alice_cached(p, start, len);
        while (len > 1) {
            const uint32_t left = (len + 1) / 2;
            bool a_left;
            if (auto c = alice_cached(p, start, left)) {
                a_left = *c;
            } else {
                a_left = alice_request(p, start, left);
                // the right half comes for free
                alice[p][range_key(start + left, len - left)] = a_cur ^ a_left;
            }
            if (a_left != bob_parity(p, start, left)) {
                len = left;
                a_cur = a_left;
            } else {
                a_cur = a_cur ^ a_left;
                start += left;
                len -= left;
            }
        }
        const uint32_t real = passes[p].perm[start];
        bob.flip(real);
        ++corrected;
        return real;
    };

    uint32_t passes_run = 0;
    for (uint32_t p = 0; p < 4; ++p) {
        const uint32_t bs = std::max(uint32_t(1), std::min(k1 << p, n / 2));
        const uint64_t seed = p == 0 ? 0 : rng.next_u64();
        PassState st;
        st.block_size = bs;
        st.perm = derive_permutation(n, seed);
        st.inv.resize(n);
        for (uint32_t i = 0; i < n; ++i) st.inv[st.perm[i]] = i;
        passes.push_back(std::move(st));
        alice.emplace_back();
        ++passes_run;

        const BitVec tops = ch.open_pass(p, seed, bs);
        const uint32_t nb = (n + bs - 1) / bs;
        if (tops.size() != nb) throw ProtocolError("cascade: wrong top-level parity count");
        leaked += nb;
        for (uint32_t b = 0; b < nb; ++b) {
            const auto r = block_range(p, b);
            alice[p][range_key(r.start, r.len)] = tops.get(b);
            enqueue_if_mismatch(p, b);
        }

        while (!pending.empty()) {
            const auto [qp, qb] = *pending.begin();
            pending.erase(pending.begin());
            const auto r = block_range(qp, qb);
            if (*alice_cached(qp, r.start, r.len) == bob_parity(qp, r.start, r.len))
                continue;  // fixed by an earlier flip
            const uint32_t real = search_and_flip(qp, qb);
            for (uint32_t op = 0; op < passes.size(); ++op)
                enqueue_if_mismatch(op, passes[op].inv[real] / passes[op].block_size);
        }

        if (p == 0 && corrected == 0) break;  // clean first pass, nothing to chase
    }

    ECBlockResult res;
    res.corrected_bits = std::move(bob);
    res.leaked_bits = leaked;
    res.qber_estimate = double(corrected) / n;
    res.passes = passes_run;
    return res;
}

uint64_t block_hash64(const BitVec& block, uint64_t seed) {
    BitVec padded = block;
    while (padded.size() < kVerifyHashBits) padded.push_back(false);
    uint64_t s = seed;
    Rng rng(splitmix64(s));
    const BitVec seed_bits = BitVec::random(rng, padded.size() + kVerifyHashBits - 1);
    return toeplitz_hash(padded, seed_bits, kVerifyHashBits).words()[0];
}

VerifyResult verify_block(const BitVec& alice_block, const BitVec& bob_block, uint64_t seed) {
    VerifyResult r;
    r.pass = alice_block.size() == bob_block.size() &&
             block_hash64(alice_block, seed) == block_hash64(bob_block, seed);
    return r;
}

uint64_t leak_ledger_total(const std::vector<ECBlockResult>& blocks,
                           uint32_t verify_bits_per_block) {
    uint64_t total = 0;
    for (const auto& b : blocks) total += b.leaked_bits + verify_bits_per_block;
    return total;
}

}  // namespace qkd
