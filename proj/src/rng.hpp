#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace sena {

using Rng = std::mt19937_64;

constexpr uint64_t fnv1a64(std::string_view data, uint64_t seed = 14695981039346656037ULL) {
    uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

constexpr uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Labeled seed splitting: every stage and per-image work item draws from its
// own stream so execution order and worker count never change the result.
constexpr uint64_t derive_seed(uint64_t base_seed, std::string_view label) {
    return splitmix64(fnv1a64(label) ^ splitmix64(base_seed));
}

inline Rng make_rng(uint64_t base_seed, std::string_view label) {
    return Rng(derive_seed(base_seed, label));
}

}  // namespace sena
