#pragma once

#include <cstdint>
#include <random>

namespace bgan {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent substreams from one seed.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed for substream `index` of purpose `stream` under a root seed.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                    std::uint64_t index = 0) noexcept {
    return mix64(mix64(seed ^ mix64(stream)) + index);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
    return Rng(derive_seed(seed, stream, index));
}

// Stream identifiers. Values are arbitrary but frozen: changing one changes every
// generated artifact.
namespace streams {
inline constexpr std::uint64_t phantom = 0x70686e74;
inline constexpr std::uint64_t noise = 0x6e6f6973;
inline constexpr std::uint64_t contamination = 0x636f6e74;
inline constexpr std::uint64_t minibatch = 0x6d626174;
inline constexpr std::uint64_t penalty = 0x67706e6c;
inline constexpr std::uint64_t init = 0x696e6974;
inline constexpr std::uint64_t elliptical = 0x656c6c70;
inline constexpr std::uint64_t estimator = 0x65737469;
inline constexpr std::uint64_t clustering = 0x636c7573;
}  // namespace streams

}  // namespace bgan
