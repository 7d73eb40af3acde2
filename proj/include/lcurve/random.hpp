#pragma once

// Seed derivation. Every random stream in the library is a std::mt19937_64
// seeded from one user seed plus a list of integer keys naming the stream,
// so results never depend on call order or scheduling.

#include <cstdint>
#include <initializer_list>
#include <random>

namespace lcurve {

using Rng = std::mt19937_64;

namespace stream {
// Stream tags. Values are part of the reproducibility contract: changing
// one changes every seeded output that uses it.
inline constexpr std::uint64_t kPool = 0x706f6f6cULL;        // "pool"
inline constexpr std::uint64_t kRepeat = 0x72657074ULL;      // "rept"
inline constexpr std::uint64_t kSubsample = 0x73756273ULL;   // "subs"
inline constexpr std::uint64_t kMcmc = 0x6d636d63ULL;        // "mcmc"
inline constexpr std::uint64_t kSynthetic = 0x73796e74ULL;   // "synt"
inline constexpr std::uint64_t kCalibration = 0x63616c62ULL; // "calb"
} // namespace stream

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) noexcept {
    std::uint64_t h = splitmix64(seed);
    for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
    return h;
}

inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
    return Rng(derive_seed(seed, keys));
}

} // namespace lcurve
