#include "asma/rng.hpp"

#include <cmath>
#include <numbers>

ASMA_NAMESPACE_BEGIN

namespace {
__extension__ using u128 = unsigned __int128;
}

std::size_t Rng::below(std::size_t n) {
    if (n <= 1) return 0;
    const auto range = static_cast<std::uint64_t>(n);
    u128 m = static_cast<u128>(engine_()) * range;
    auto low = static_cast<std::uint64_t>(m);
    if (low < range) {
        const std::uint64_t threshold = (0 - range) % range;
        while (low < threshold) {
            m = static_cast<u128>(engine_()) * range;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::size_t>(m >> 64);
}

double Rng::normal() {
    // 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

ASMA_NAMESPACE_END
