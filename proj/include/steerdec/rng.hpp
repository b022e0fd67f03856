#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace steerdec {

// SplitMix64: tiny, fast, splittable-by-reseeding generator. Every stochastic
// component in the library draws from one of these so that results are
// bit-reproducible for a given seed, independent of platform and standard
// library version (std::uniform_real_distribution et al. are not portable).
class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1), 53 bits of entropy.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). Modulo bias is negligible for the small n
    // used here (vocabulary and corpus sizes).
    std::uint64_t uniform_below(std::uint64_t n) { return next_u64() % n; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller without spare caching; two uniforms per draw keeps the
    // stream position a pure function of the draw count.
    double normal(double mean, double stddev) {
        double u1 = uniform01();
        double u2 = uniform01();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(6.283185307179586476925286766559 * u2);
    }

  private:
    std::uint64_t state_;
};

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Derives an independent rng stream for (seed, key, index). Used to give each
// (prompt, sample) pair its own stream so that evaluation order and batch
// composition cannot change the outcome.
inline std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t key_hash,
                                        std::uint64_t index) {
    SplitMix64 mixer(seed ^ (key_hash * 0x9e3779b97f4a7c15ULL) ^ (index + 0x517cc1b727220a95ULL));
    mixer.next_u64();
    return mixer.next_u64();
}

}  // namespace steerdec
