#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

#include "asma/precision.hpp"

ASMA_NAMESPACE_BEGIN

/// splitmix64 finalizer; used to derive independent per-(sample, epoch) seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
    return mix64(mix64(mix64(base) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

/// Seeded random source. The engine sequence is fixed by the standard; the
/// conversions to real/integer draws are written out here so results do not
/// depend on the standard library's distribution implementations.
class Rng {
   public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Lemire's multiply-shift with rejection.
    std::size_t below(std::size_t n);

    /// Standard normal via Box-Muller (one value per call, no caching).
    double normal();

    bool bernoulli(double p) { return uniform() < p; }

   private:
    std::mt19937_64 engine_;
};

ASMA_NAMESPACE_END
