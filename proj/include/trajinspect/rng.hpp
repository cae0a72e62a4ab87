#ifndef TRAJINSPECT_RNG_HPP
#define TRAJINSPECT_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>

namespace trajinspect {

/// splitmix64 finalizer, used to derive independent substream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of substream `index` under `seed`. Results never depend on the
/// order in which substreams are consumed.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return mix64(seed ^ mix64(index));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t i, std::uint64_t j) {
    return derive_seed(derive_seed(seed, i), j);
}

/// Deterministic random stream. The engine is std::mt19937_64, whose output
/// sequence is fixed by the standard; the transforms below are written out so
/// draws are identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n) by rejection, no modulo bias.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    /// Standard normal via Box-Muller (one value per call).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Index drawn from unnormalized non-negative weights. Falls back to the
    /// last positive weight when rounding leaves the draw past the total.
    template <typename Weights>
    std::size_t categorical(const Weights& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        const double u = uniform() * total;
        double acc = 0.0;
        std::size_t last_positive = 0;
        std::size_t i = 0;
        for (double w : weights) {
            if (w > 0.0) {
                acc += w;
                last_positive = i;
                if (u < acc) return i;
            }
            ++i;
        }
        return last_positive;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace trajinspect

#endif  // TRAJINSPECT_RNG_HPP
