// Seeded RNG plumbing. Every stochastic operation takes an explicit seed;
// sub-streams are derived from a master seed with split_seed so that serial
// and parallel execution consume identical randomness.

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dgme {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derives an independent sub-seed from (master, label, index). FNV-1a over the
// label keeps streams with different purposes apart even for equal indices.
inline std::uint64_t split_seed(std::uint64_t master, std::string_view label,
                                std::uint64_t index = 0) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return mix64(master ^ mix64(h ^ mix64(index)));
}

} // namespace dgme
