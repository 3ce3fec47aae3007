// Copyright (C) 2026 the kvevict authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

// Deterministic, platform-independent randomness.
//
// Everything here is pinned bit-for-bit: std::mt19937_64's output sequence is
// fixed by the C++ standard, splitmix64 is a published constant-defined mixer,
// and the uniform/gaussian transforms are written out by hand because the
// std::*_distribution classes are allowed to differ between standard library
// implementations. Trace files record kAlgorithmId so a reader knows exactly
// how the numbers were produced.
namespace kvevict::rng {

inline constexpr std::string_view kAlgorithmId = "splitmix64/mt19937_64/box-muller/v1";

inline constexpr double kTwoPi = 6.283185307179586;

// One splitmix64 step: advances `state` and returns the next 64-bit output.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stateless avalanche mix of a single word (the splitmix64 output function).
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Folds one more word into a derived seed. Used to split a master seed into
// independent per-layer / per-purpose subseeds: chain hash_combine over tags.
inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
    return mix64(seed ^ (value + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

// Maps 64 random bits to a double in (0, 1]. The +1 keeps log() finite.
inline double canonical(std::uint64_t bits) {
    return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

// One standard-normal draw from a single 64-bit hash value, via two further
// splitmix64 outputs and Box-Muller. Counter-based: the same hash always
// yields the same draw, with no sequential generator state involved.
inline double gaussian_from_hash(std::uint64_t h) {
    std::uint64_t state = h;
    const double u1 = canonical(splitmix64(state));
    const double u2 = canonical(splitmix64(state));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

/**
 * @brief Sequential seedable random stream.
 *
 * Thin wrapper over std::mt19937_64 with hand-rolled distribution transforms;
 * draws are identical on every platform for a given seed.
 */
class Stream {
public:
    explicit Stream(std::uint64_t seed) : m_engine(seed) {}

    std::uint64_t next_u64() {
        return m_engine();
    }

    // Uniform in (0, 1].
    double next_canonical() {
        return canonical(m_engine());
    }

    // Uniform in [lo, hi).
    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * (next_canonical() - 0x1.0p-53);
    }

    // Standard normal via Box-Muller; consumes two engine outputs per draw.
    double next_gaussian() {
        const double u1 = next_canonical();
        const double u2 = next_canonical();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
    }

private:
    std::mt19937_64 m_engine;
};

}  // namespace kvevict::rng
