#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

namespace hita {

// Seeded generator with platform-independent derived distributions.
// std::mt19937_64 has a standardized output sequence; the std::*_distribution
// templates do not, so the helpers below are written out.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 42) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform double in [0, 1).
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in the closed range [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
        const std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo);
        if (span == UINT64_MAX) return static_cast<std::int64_t>(engine_());
        const std::uint64_t range = span + 1;
        const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % range);
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return static_cast<std::int64_t>(static_cast<std::uint64_t>(lo) + x % range);
    }

    std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(n) - 1)); }

    bool bernoulli(double p) { return uniform01() < p; }

    // Index drawn proportionally to non-negative weights.
    std::size_t weighted(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (!(total > 0.0)) throw std::invalid_argument("weighted: weights must sum to a positive value");
        double r = uniform01() * total;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (r < weights[i]) return i;
            r -= weights[i];
        }
        return weights.size() - 1;
    }

    // Box-Muller; consumes two draws.
    double normal() {
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace hita
