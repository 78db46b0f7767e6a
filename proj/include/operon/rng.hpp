// Deterministic random number generation.
//
// Every stochastic operation in the library draws from an explicitly seeded
// stream, and stream derivation is a pure function of (master seed, index or
// tag). Results are therefore reproducible bit-for-bit across runs and
// independent of evaluation order.
#pragma once

#include "operon/common.hpp"

#include <bit>
#include <cstdint>

namespace operon {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Stream i of a master seed; pure in (master, index).
inline std::uint64_t derive_stream(std::uint64_t master, std::uint64_t index) {
    std::uint64_t s = master ^ (0x9e3779b97f4a7c15ull * (index + 1));
    std::uint64_t a = splitmix64(s);
    std::uint64_t b = splitmix64(s);
    return a ^ std::rotr(b, 17);
}

/// Named sub-stream (e.g. "motions", "split"); pure in (master, tag).
inline std::uint64_t derive_stream(std::uint64_t master, std::string_view tag) {
    return derive_stream(master, fnv1a64(tag));
}

/// xoshiro256++ with splitmix64 state fill.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = std::rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = std::rotl(state_[3], 45);
        return result;
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(next_u64() % i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_[4];
};

}  // namespace operon
