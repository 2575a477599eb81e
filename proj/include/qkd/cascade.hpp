#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "qkd/bitvec.hpp"
#include "qkd/rng.hpp"

namespace qkd {

double binary_entropy(double x);  // h(x), throws std::domain_error outside [0,1]

struct ECBlockResult {
    BitVec corrected_bits;
    uint64_t leaked_bits = 0;  // parity bits that crossed the channel
    double qber_estimate = 0.0;
    uint32_t passes = 0;
};

struct ParityRange {
    uint32_t start = 0;  // in the permuted view of the pass
    uint32_t len = 0;
};

// Bob's view of the interactive parity protocol. Parity bits flow in one
// direction only (the ranges Bob names cost him nothing from the leak
// ledger's point of view); the transport must be reliable, ordered,
// request-reply.
class ParityChannel {
public:
    virtual ~ParityChannel() = default;
    // Announce a pass; the peer builds the permuted view and returns the
    // parities of all ceil(n/block_size) top-level blocks.
    virtual BitVec open_pass(uint32_t pass, uint64_t perm_seed, uint32_t block_size) = 0;
    virtual BitVec parities(uint32_t pass, const std::vector<ParityRange>& ranges) = 0;
};

// Alice's side of the same protocol for a single block.
class BlockParityServer {
public:
    explicit BlockParityServer(BitVec block);
    BitVec open_pass(uint32_t pass, uint64_t perm_seed, uint32_t block_size);
    BitVec parities(uint32_t pass, const std::vector<ParityRange>& ranges) const;
    const BitVec& block() const { return block_; }

private:
    struct PassView {
        uint32_t block_size = 0;
        std::vector<uint8_t> prefix;  // prefix[i] = parity of permuted bits [0, i)
    };
    BitVec block_;
    std::unordered_map<uint32_t, PassView> passes_;
};

// In-process channel: Bob's requests answered directly by a local server.
class LocalParityChannel : public ParityChannel {
public:
    explicit LocalParityChannel(BitVec alice_block) : server_(std::move(alice_block)) {}
    BitVec open_pass(uint32_t pass, uint64_t perm_seed, uint32_t block_size) override {
        return server_.open_pass(pass, perm_seed, block_size);
    }
    BitVec parities(uint32_t pass, const std::vector<ParityRange>& ranges) override {
        return server_.parities(pass, ranges);
    }

private:
    BlockParityServer server_;
};

// Fisher-Yates permutation of [0, n); seed 0 is reserved for identity.
std::vector<uint32_t> derive_permutation(uint32_t n, uint64_t perm_seed);

// Interactive correction of Bob's block against the block behind the
// channel. Four passes, first-pass size ~0.73/q, size doubling, full
// backtracking across passes. Every parity learned is cached so a revisit
// never pays for the same bit twice.
ECBlockResult cascade_correct(const BitVec& bob_block, double q_initial, ParityChannel& ch,
                              Rng& rng);

// 64-bit Toeplitz hash for block verification; seed expands to n+63 bits.
uint64_t block_hash64(const BitVec& block, uint64_t seed);

inline constexpr uint32_t kVerifyHashBits = 64;

struct VerifyResult {
    bool pass = false;
    uint32_t hash_bits = kVerifyHashBits;
};

// Local form of the verification exchange (the wire form sends the hash in
// a VERIFY message): both sides hash with the same seed and compare.
VerifyResult verify_block(const BitVec& alice_block, const BitVec& bob_block, uint64_t seed);

uint64_t leak_ledger_total(const std::vector<ECBlockResult>& blocks,
                           uint32_t verify_bits_per_block = kVerifyHashBits);

}  // namespace qkd
