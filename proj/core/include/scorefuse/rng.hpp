#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace scorefuse {

/// Counter-based pseudo-random stream. The i-th output is a pure function of
/// (seed, i), so draws are reproducible regardless of thread scheduling and
/// streams can be forked per ensemble member. The construction is the
/// SplitMix64 generator expressed in stateless form.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

    std::uint64_t next_u64() {
        std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; fixed consumption of two uniforms per
    /// pair keeps the stream layout deterministic.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1], safe for log
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    void fill_normal(std::span<double> out) {
        for (double& v : out) v = normal();
    }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// Derives an independent stream key from a base seed and a stream index.
inline std::uint64_t derive_stream_seed(std::uint64_t base_seed, std::uint64_t index) {
    return base_seed + index;
}

}  // namespace scorefuse
