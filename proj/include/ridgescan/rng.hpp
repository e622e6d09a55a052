#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ridgescan {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Deterministic child seed for stream `k` of a root seed. Used to give every
/// bootstrap replicate / simulation trial its own independent generator.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t k) {
    return splitmix64(root ^ splitmix64(k + 1));
}

/// mt19937_64 (engine sequence is fixed by the standard) with our own
/// distribution transforms, so streams are reproducible across platforms and
/// library versions. std::*_distribution is implementation-defined and is
/// deliberately not used.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    /// Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (pairwise, one value cached).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // u1 in (0,1] so the log is finite.
        double u1 = static_cast<double>((eng_() >> 11) + 1) * 0x1.0p-53;
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Uniform index in [0, n). Modulo reduction; the bias is O(n / 2^64) and
    /// irrelevant at the sample sizes used here.
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(eng_() % static_cast<std::uint64_t>(n));
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace ridgescan
