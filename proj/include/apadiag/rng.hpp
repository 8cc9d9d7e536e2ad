// rng.hpp - seeded random streams with fully specified output transforms.
//
// std::mt19937_64 gives a portable bit stream, but the standard distributions
// are implementation-defined, so every transform used here (uniform, bounded
// int, Gaussian) is spelled out explicitly. Two builds with the same seed
// produce the same samples.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "apadiag/common.hpp"

namespace apadiag {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Deterministic sub-seed derivation; salt is typically fnv1a64 of a role tag
// mixed with loop indices so independent streams never alias.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
    std::uint64_t s = base ^ (0x9e3779b97f4a7c15ull + salt * 0xd1342543de82ef95ull);
    std::uint64_t a = splitmix64(s);
    std::uint64_t b = splitmix64(s);
    return a ^ (b << 1);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index = 0) {
    return derive_seed(base, fnv1a64(tag) ^ (index * 0x9e3779b97f4a7c15ull + index));
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1]; safe as a log() argument.
    double uniform01_open() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Unbiased integer in [0, n): reject draws below 2^64 mod n.
    std::uint64_t bounded(std::uint64_t n) {
        if (n < 2) return 0;
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Box-Muller pair of independent standard normals.
    void normal_pair(double& z0, double& z1) {
        const double u1 = uniform01_open();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        z0 = r * std::cos(theta);
        z1 = r * std::sin(theta);
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double z0, z1;
        normal_pair(z0, z1);
        spare_ = z1;
        have_spare_ = true;
        return z0;
    }

  private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace apadiag
