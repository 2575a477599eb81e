#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "qkd/rng.hpp"

namespace qkd {

// Packed bit buffer, LSB-first within each 64-bit word. Bit i of the vector
// is bit (i % 64) of word (i / 64); the same order is used on the wire.
class BitVec {
public:
    BitVec() = default;
    explicit BitVec(size_t n) : n_(n), w_((n + 63) / 64, 0) {}

    static BitVec random(Rng& rng, size_t n) {
        BitVec v(n);
        for (auto& w : v.w_) w = rng.next_u64();
        v.trim();
        return v;
    }

    // "1011" -> bit0=1, bit1=0, bit2=1, bit3=1
    static BitVec from_string(const std::string& s) {
        BitVec v(s.size());
        for (size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '1') v.set(i, true);
            else if (s[i] != '0') throw std::invalid_argument("BitVec: bad bit char");
        }
        return v;
    }

    size_t size() const { return n_; }
    bool empty() const { return n_ == 0; }

    bool get(size_t i) const { return (w_[i >> 6] >> (i & 63)) & 1; }
    void set(size_t i, bool b) {
        const uint64_t mask = 1ULL << (i & 63);
        if (b) w_[i >> 6] |= mask;
        else w_[i >> 6] &= ~mask;
    }
    void flip(size_t i) { w_[i >> 6] ^= 1ULL << (i & 63); }

    void push_back(bool b) {
        if ((n_ & 63) == 0 && w_.size() == (n_ >> 6)) w_.push_back(0);
        if (b) w_[n_ >> 6] |= 1ULL << (n_ & 63);
        ++n_;
    }

    // Truncate or zero-extend.
    void resize(size_t n) {
        w_.resize((n + 63) / 64, 0);
        n_ = n;
        trim();
    }

    void append(const BitVec& o) {
        for (size_t i = 0; i < o.n_; ++i) push_back(o.get(i));
    }

    BitVec slice(size_t start, size_t len) const {
        BitVec v(len);
        for (size_t i = 0; i < len; ++i) v.set(i, get(start + i));
        return v;
    }

    // Parity (xor) of bits [start, start+len).
    bool parity(size_t start, size_t len) const {
        if (len == 0) return false;
        size_t end = start + len;  // exclusive
        size_t wa = start >> 6, wb = (end - 1) >> 6;
        uint64_t acc;
        if (wa == wb) {
            acc = w_[wa] & mask_ge(start & 63) & mask_lt(((end - 1) & 63) + 1);
        } else {
            acc = w_[wa] & mask_ge(start & 63);
            for (size_t w = wa + 1; w < wb; ++w) acc ^= w_[w];
            acc ^= w_[wb] & mask_lt(((end - 1) & 63) + 1);
        }
        return std::popcount(acc) & 1;
    }

    size_t count_ones() const {
        size_t c = 0;
        for (auto w : w_) c += std::popcount(w);
        return c;
    }

    size_t hamming_distance(const BitVec& o) const {
        size_t c = 0;
        for (size_t i = 0; i < w_.size(); ++i) c += std::popcount(w_[i] ^ o.w_[i]);
        return c;
    }

    BitVec& operator^=(const BitVec& o) {
        for (size_t i = 0; i < w_.size(); ++i) w_[i] ^= o.w_[i];
        return *this;
    }

    bool operator==(const BitVec& o) const { return n_ == o.n_ && w_ == o.w_; }
    bool operator!=(const BitVec& o) const { return !(*this == o); }

    const std::vector<uint64_t>& words() const { return w_; }

    std::vector<uint8_t> to_bytes() const {
        std::vector<uint8_t> out((n_ + 7) / 8, 0);
        for (size_t i = 0; i < out.size(); ++i) {
            const size_t w = i >> 3, sh = (i & 7) * 8;
            if (w < w_.size()) out[i] = uint8_t(w_[w] >> sh);
        }
        return out;
    }

    static BitVec from_bytes(const uint8_t* data, size_t nbits) {
        BitVec v(nbits);
        const size_t nbytes = (nbits + 7) / 8;
        for (size_t i = 0; i < nbytes; ++i)
            v.w_[i >> 3] |= uint64_t(data[i]) << ((i & 7) * 8);
        v.trim();
        return v;
    }

    std::string to_string() const {
        std::string s(n_, '0');
        for (size_t i = 0; i < n_; ++i)
            if (get(i)) s[i] = '1';
        return s;
    }

private:
    // zero any bits beyond n_ in the last word
    void trim() {
        if (n_ & 63) w_.back() &= mask_lt(n_ & 63);
        if (w_.size() > (n_ + 63) / 64) w_.resize((n_ + 63) / 64);
    }
    static uint64_t mask_ge(size_t b) { return ~0ULL << b; }
    static uint64_t mask_lt(size_t b) { return b >= 64 ? ~0ULL : (1ULL << b) - 1; }

    size_t n_ = 0;
    std::vector<uint64_t> w_;
};

}  // namespace qkd
