#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace qxfer {

// SplitMix64 step. Used only to turn (master_seed, domain, index) into a
// well-mixed 64-bit seed; the stream engine itself is std::mt19937_64, whose
// output sequence is fixed by the standard, so streams are bit-identical
// across platforms and worker counts.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Disjoint stream families. Keeps optimizer restarts from replaying the
// landscape's sample streams under the same master seed.
enum class StreamDomain : std::uint64_t {
    LandscapeSample = 1,
    OptimizerRestart = 2,
};

// Deterministic per-index stream: every (master_seed, domain, index) triple
// names one engine, owned by exactly one worker at a time.
inline std::mt19937_64 derive_stream(std::uint64_t master_seed, StreamDomain domain,
                                     std::uint64_t index) {
    std::uint64_t state = master_seed;
    std::uint64_t seed = splitmix64(state);
    state ^= static_cast<std::uint64_t>(domain) * 0x9e3779b97f4a7c15ull;
    seed ^= splitmix64(state);
    state ^= index * 0xbf58476d1ce4e5b9ull;
    seed ^= splitmix64(state);
    return std::mt19937_64(seed);
}

// Uniform double in [0, 1) built from the top 53 bits. Hand-rolled instead of
// std::uniform_real_distribution, whose output is not pinned by the standard.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform point in the open ball of the given radius, by rejection from the
// bounding cube. Component draw order is fixed (x, y, z) so the consumed
// stream positions are reproducible.
inline Eigen::Vector3d uniform_in_ball(std::mt19937_64& rng, double radius) {
    for (;;) {
        const double x = 2.0 * uniform01(rng) - 1.0;
        const double y = 2.0 * uniform01(rng) - 1.0;
        const double z = 2.0 * uniform01(rng) - 1.0;
        if (x * x + y * y + z * z < 1.0) {
            return radius * Eigen::Vector3d(x, y, z);
        }
    }
}

} // namespace qxfer
