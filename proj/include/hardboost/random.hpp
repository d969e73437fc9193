#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace hardboost {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Seed of the named substream `name`/`index` of a base seed. Streams with
// different names never share state, so adding a consumer leaves others intact.
constexpr std::uint64_t substream_seed(std::uint64_t seed, std::string_view name,
                                       std::uint64_t index = 0) noexcept {
    return splitmix64(splitmix64(seed ^ fnv1a64(name)) + splitmix64(index));
}

inline Rng substream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0) {
    return Rng(substream_seed(seed, name, index));
}

// Uniform draw from the open interval (0, 1).
inline double uniform_open01(Rng& rng) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    double u = 0.0;
    do {
        u = dist(rng);
    } while (u <= 0.0 || u >= 1.0);
    return u;
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    std::uniform_int_distribution<std::size_t> dist(0, n - 1);
    return dist(rng);
}

}  // namespace hardboost
