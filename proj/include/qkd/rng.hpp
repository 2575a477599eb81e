#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace qkd {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256** seeded via splitmix64. All distributions are hand-rolled so a
// given seed produces the same stream on every platform; the detection loop
// draws from this several times per candidate slot.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t s = seed;
        for (auto& w : state_) w = splitmix64(s);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Independent substream; safe as long as tags differ.
    Rng fork(uint64_t tag) {
        uint64_t s = next_u64() ^ (0x6a09e667f3bcc909ULL + tag);
        return Rng(splitmix64(s));
    }

    // [0,1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // (0,1), usable as log() argument
    double uniform_pos() {
        return (double(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    bool bernoulli(double p) { return uniform() < p; }

    uint32_t uniform_int(uint32_t n) {  // [0,n)
        return uint32_t((__uint128_t(next_u64()) * n) >> 64);
    }

    // Poisson by inversion; fine for the small means used here.
    uint32_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        double u = uniform();
        double term = std::exp(-mean);
        double cum = term;
        uint32_t k = 0;
        while (u >= cum && k < 20000) {
            ++k;
            term *= mean / k;
            cum += term;
        }
        return k;
    }

    // Poisson conditioned on being >= 1.
    uint32_t poisson_at_least_one(double mean) {
        const double p0 = std::exp(-mean);
        double u = p0 + uniform_pos() * (1.0 - p0);  // CDF value beyond P(0)
        double term = p0;
        double cum = p0;
        uint32_t k = 0;
        while (u >= cum && k < 20000) {
            ++k;
            term *= mean / k;
            cum += term;
        }
        return k == 0 ? 1 : k;
    }

    // Geometric slot gap >= 1 with success probability p; mean 1/p.
    uint64_t geometric_slots(double p) {
        if (p >= 1.0) return 1;
        const double g = std::floor(std::log(uniform_pos()) / std::log1p(-p));
        if (g >= 9.2e18) return UINT64_MAX;
        return uint64_t(g) + 1;
    }

    double normal(double sigma) {
        const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
        return sigma * r * std::cos(6.283185307179586 * uniform());
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::array<uint64_t, 4> state_;
};

}  // namespace qkd
