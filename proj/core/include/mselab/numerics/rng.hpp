#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace mse::num {

// Counter-based PRNG with a splitmix64 output function. The draw at a given
// (seed, counter) is a pure function of those two words, so streams are
// identical across platforms and independent of call history.
struct RngState {
    std::uint64_t seed = 0;
    std::uint64_t counter = 0;

    RngState() = default;
    explicit RngState(std::uint64_t s, std::uint64_t c = 0) : seed(s), counter(c) {}

    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t next_u64() {
        ++counter;
        return mix(seed + counter * kGolden);
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    float uniform_float() { return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f; }

    // Uniform integer in [0, n). n == 0 is a caller bug; returns 0.
    std::uint64_t uniform_below(std::uint64_t n) {
        if (n == 0) return 0;
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller without a cached spare so each value is a pure function of
    // the counter pair it consumes.
    double normal() {
        double u1 = (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Independent child stream; used to give every language/phase its own
    // reproducible stream regardless of scheduling.
    RngState derive(std::uint64_t tag) const {
        return RngState(mix(seed ^ mix(tag + 0x164EB6E5D1F9B2BDULL)));
    }

    RngState derive(std::string_view label) const {
        std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
        for (unsigned char c : label) {
            h ^= c;
            h *= 0x100000001B3ULL;
        }
        return derive(h);
    }
};

}  // namespace mse::num
