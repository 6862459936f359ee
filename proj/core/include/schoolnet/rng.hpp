#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace schoolnet {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derive a child seed from a parent seed and a path of stream identifiers.
///
/// Streams are addressed by position, never by draw order, so a replicate's
/// random numbers are the same whichever worker runs it and in whatever order.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t h = splitmix64(seed);
    for (auto id : path) h = splitmix64(h ^ splitmix64(id + 0x632be59bd9b4e019ULL));
    return h;
}

inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {}) {
    return Rng{derive_seed(seed, path)};
}

/// Stream tags for `derive_seed` paths.
namespace stream {
inline constexpr std::uint64_t friendship = 1;
inline constexpr std::uint64_t bootstrap = 2;
inline constexpr std::uint64_t plan = 3;
inline constexpr std::uint64_t outbreak = 4;
inline constexpr std::uint64_t interval = 5;
inline constexpr std::uint64_t day = 6;
inline constexpr std::uint64_t class_layer = 7;
inline constexpr std::uint64_t roster = 8;
inline constexpr std::uint64_t survey = 9;
inline constexpr std::uint64_t attempt = 10;
}  // namespace stream

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

}  // namespace schoolnet
