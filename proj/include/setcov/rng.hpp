#pragma once

#include <cmath>
#include <cstdint>

#include "setcov/common.hpp"

namespace setcov {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}
} // namespace detail

/// Counter-based splittable generator.  A stream is identified by up to three
/// indices (seed, i0, i1); draws are a pure function of (key, counter), so
/// parallel consumers can be given disjoint streams and reductions stay
/// bit-identical regardless of scheduling.
class counter_rng {
public:
    explicit counter_rng(std::uint64_t seed, std::uint64_t i0 = 0, std::uint64_t i1 = 0) {
        key_ = detail::splitmix64(seed);
        key_ = detail::splitmix64(key_ ^ (0x9E3779B97F4A7C15ULL + i0));
        key_ = detail::splitmix64(key_ ^ (0xC2B2AE3D27D4EB4FULL + i1));
    }

    std::uint64_t next_u64() { return detail::splitmix64(key_ ^ (counter_++ * 0xD6E8FEB86659FD93ULL)); }

    /// Uniform in (0,1); never returns exactly 0 so log() is safe.
    double next_uniform() {
        const std::uint64_t bits = next_u64() >> 11; // 53 bits
        double u = static_cast<double>(bits) * 0x1.0p-53;
        return u > 0.0 ? u : 0x1.0p-53;
    }

    /// Uniform in [a,b).
    double next_uniform(double a, double b) { return a + (b - a) * next_uniform(); }

    /// Standard normal via Box-Muller (pair cached).
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace setcov
