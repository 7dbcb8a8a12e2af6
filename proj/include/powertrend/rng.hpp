#pragma once

#include <cstdint>

namespace powertrend {

// Counter-based generator: every (key, counter) pair maps to an output
// independent of evaluation order, so parallel consumers reproduce the
// exact stream of a sequential run. Mixing is the splitmix64 finalizer
// applied to the combined key/counter state.
namespace rng {

constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t combine(std::uint64_t key, std::uint64_t counter) {
    return mix64(mix64(key) ^ (counter * 0xd6e8feb86659fd93ULL + 0x2545f4914f6cdd1dULL));
}

// Uniform double in (0,1), strictly excluding both endpoints.
inline double uniform_at(std::uint64_t key, std::uint64_t counter) {
    return (static_cast<double>(combine(key, counter) >> 11) + 0.5) * 0x1.0p-53;
}

// Standard normal via Box-Muller; consumes counters 2c and 2c+1.
double gaussian_at(std::uint64_t key, std::uint64_t counter);

// Derives an independent subkey, used to give each replication of a study
// its own stream.
constexpr std::uint64_t derive_key(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
    return mix64(mix64(base ^ 0x8e9c1ce2f8a7b2d4ULL) + mix64(a) + 3 * mix64(b));
}

}  // namespace rng
}  // namespace powertrend
