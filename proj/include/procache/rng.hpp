#pragma once

#include <cmath>
#include <cstdint>

namespace procache {

/// SplitMix64 stream (Steele, Lea & Flood's mixer). Every random draw in the
/// project goes through this generator so that results are reproducible from
/// a single 64-bit seed, independent of the platform's <random> internals.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1), 53 significant bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound). Rejection-sampled, exactly uniform.
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t threshold = (0ULL - bound) % bound;
        std::uint64_t r;
        do {
            r = next();
        } while (r < threshold);
        return r % bound;
    }

    /// Uniform 128-bit integer in [0, bound). Used by the multiset unranker,
    /// whose rank space can exceed 2^64.
    unsigned __int128 below128(unsigned __int128 bound) {
        using u128 = unsigned __int128;
        const u128 threshold = (u128{0} - bound) % bound;
        u128 r;
        do {
            r = (u128{next()} << 64) | next();
        } while (r < threshold);
        return r % bound;
    }

    /// Standard normal via Box-Muller; consumes two uniforms per value and
    /// discards the paired sample, keeping the stream position unambiguous.
    double gaussian() {
        const double u1 = static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    std::uint64_t state_;
};

}  // namespace procache
