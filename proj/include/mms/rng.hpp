#pragma once

#include <cstdint>
#include <random>

namespace mms {

// splitmix64 finalizer; decorrelates nearby (seed, counter) pairs.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent substream for iteration `counter` of a seeded procedure.
// Results are identical no matter how iterations are ordered or parallelized.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t counter) {
    return std::mt19937_64(mix64(mix64(seed) ^ counter));
}

}  // namespace mms
