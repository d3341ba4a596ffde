#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace srcd {

/// Seeded random source. All draws are implemented on top of the raw 64-bit
/// generator output instead of <random> distributions, which are
/// implementation-defined; outputs are therefore reproducible for a given
/// seed on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), gen_(scramble(seed)) {}

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be positive.
    std::size_t uniform_index(std::size_t n) {
        // Lemire multiply-shift; bias is < 2^-64 per draw.
        const auto x = static_cast<unsigned __int128>(gen_());
        return static_cast<std::size_t>((x * n) >> 64);
    }

    /// Standard normal via Box-Muller.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.28318530717958647692 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    /// Independent child stream; children with distinct ids never collide
    /// regardless of how many draws either generator has made.
    Rng split(std::uint64_t stream) const {
        return Rng(scramble(seed_ ^ (0x9E3779B97F4A7C15ULL * (stream + 1))));
    }

    std::uint64_t seed() const { return seed_; }

private:
    // splitmix64 finalizer; decorrelates nearby seeds before feeding mt19937_64.
    static std::uint64_t scramble(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    std::uint64_t seed_;
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace srcd
