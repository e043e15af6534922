// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>

namespace clorf {

// SplitMix64 finalizer. All randomness in the library flows through this
// mixer so that every draw is a pure function of (seed, position).
inline std::uint64_t splitmix64_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t kSplitMixGamma = 0x9E3779B97F4A7C15ULL;

// Sequential SplitMix64 stream.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += kSplitMixGamma;
        return splitmix64_mix(state_);
    }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

private:
    std::uint64_t state_;
};

// Counter-based draw: value at `index` of the stream named by `seed`,
// independent of any generator state. Parallel evaluation preserves the
// index -> variate mapping.
inline std::uint64_t counter_u64(std::uint64_t seed, std::uint64_t index) {
    return splitmix64_mix(seed + (index + 1) * kSplitMixGamma);
}

// Uniform in (0, 1]; never returns 0 so it is safe under log().
inline double counter_double_pos(std::uint64_t seed, std::uint64_t index) {
    return double((counter_u64(seed, index) >> 11) + 1) * 0x1.0p-53;
}

// Standard normal variate at element `index`: Box-Muller on the counter
// stream, u1 from position 2*index, u2 from 2*index+1, cosine branch only.
inline double counter_normal(std::uint64_t seed, std::uint64_t index) {
    const double u1 = counter_double_pos(seed, 2 * index);
    const double u2 = counter_double_pos(seed, 2 * index + 1);
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(2.0 * M_PI * u2);
}

// Derives an independent child seed, used to split one user seed into
// per-component streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    return splitmix64_mix(seed ^ splitmix64_mix(salt + 0x632BE59BD9B4E019ULL));
}

} // namespace clorf
