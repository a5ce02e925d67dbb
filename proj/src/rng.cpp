#include "rlsim/rng.hpp"

#include <cmath>

namespace rlsim {

double RngStream::normal() {
    const double u1 = uniform01_open_low();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(6.283185307179586476925286766559 * u2);
}

std::uint64_t RngStream::below(std::uint64_t n) {
    // Rejection to avoid modulo bias.
    if (n == 0) return 0;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
}

}  // namespace rlsim
