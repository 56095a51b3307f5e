// Portable seeded randomness. The standard distributions are implementation
// defined, so sampling is done here from raw 64-bit words to keep seeded output
// identical across compilers and platforms.
#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>

namespace pmubqkd {

/// SplitMix64 (Steele, Lea, Flood). Satisfies UniformRandomBitGenerator.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit constexpr SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

    /// Independent stream for item `index` of a run seeded with `seed`.
    static constexpr SplitMix64 for_stream(std::uint64_t seed, std::uint64_t index) noexcept {
        SplitMix64 mix(seed ^ (0xD1B54A32D192ED03ULL * (index + 1)));
        return SplitMix64(mix());
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    constexpr double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n), rejection sampled (no modulo bias).
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("below(0)");
        const std::uint64_t limit = max() - max() % n;
        std::uint64_t x;
        do {
            x = (*this)();
        } while (x >= limit);
        return x % n;
    }

    bool bit() noexcept { return ((*this)() >> 63) != 0; }

    /// Index drawn from nonnegative weights summing to ~1; the last positive weight absorbs rounding.
    std::size_t categorical(std::span<const double> weights) {
        const double u = uniform();
        double acc = 0.0;
        std::size_t last = 0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (weights[i] <= 0.0) continue;
            acc += weights[i];
            last = i;
            if (u < acc) return i;
        }
        return last;
    }

private:
    std::uint64_t state_;
};

}  // namespace pmubqkd
