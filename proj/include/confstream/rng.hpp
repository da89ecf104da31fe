#pragma once

#include <cmath>
#include <cstdint>

namespace confstream {

// Deterministic 64-bit generator based on splitmix64 (Steele et al.).
// The exact algorithm is part of the stream format contract: a stream
// generated from a seed must be reproducible bit-for-bit, so no
// implementation-defined distributions from <random> are used.
//
//   state += 0x9E3779B97F4A7C15
//   z = state
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   return z ^ (z >> 31)
//
// Substreams: Rng(seed, tag) mixes the tag into the seed so the simulator
// and the run driver consume independent sequences from one user seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t tag = 0)
        : state_(mix(mix(seed) ^ mix(tag ^ 0x6A09E667F3BCC909ull))) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        std::uint64_t v = static_cast<std::uint64_t>(next_double() * static_cast<double>(n));
        return v >= n ? n - 1 : v;
    }

    // Standard normal via Box-Muller; consumes exactly two uniforms per call
    // (no cached second value, to keep the draw order trivial to document).
    double next_gaussian() {
        double u1 = 1.0 - next_double();  // (0, 1]
        double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

// Tags for the two substreams a run consumes.
inline constexpr std::uint64_t kSimStreamTag = 1;
inline constexpr std::uint64_t kRunStreamTag = 2;

}  // namespace confstream
