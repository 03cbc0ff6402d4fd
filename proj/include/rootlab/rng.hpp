#pragma once

#include <cstdint>
#include <random>

namespace rootlab {

inline constexpr const char* kRngName =
    "mt19937_64 seeded per path by splitmix64(seed, stream, path); ziggurat normals (Boost.Random)";

inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Independent generator for (seed, stream, path); streams separate
/// simulations that share a seed.
inline std::mt19937_64 path_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t path) noexcept {
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64(s);
    s = a ^ (stream * 0xD1B54A32D192ED03ULL);
    std::uint64_t b = splitmix64(s);
    s = b ^ (path * 0x8CB92BA72F3D8DD7ULL);
    return std::mt19937_64(splitmix64(s));
}

}  // namespace rootlab
