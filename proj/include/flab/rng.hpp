#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace flab {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// 64-bit FNV-1a, used for config digests and golden-weight checks.
inline std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

// mt19937_64 engine with hand-rolled distributions. The engine's output is
// pinned by the standard; std::uniform_real_distribution and friends are not,
// so draws here are reproducible across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(splitmix64(seed)) {}

    std::uint64_t next() { return eng_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    // Standard normal via Box-Muller (cosine branch only, no cached value).
    double normal() {
        constexpr double two_pi = 6.28318530717958647692;
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    // [0, n), unbiased
    std::size_t uniform_index(std::size_t n) {
        std::uint64_t threshold = (0ull - n) % n;
        for (;;) {
            std::uint64_t r = eng_();
            if (r >= threshold) return static_cast<std::size_t>(r % n);
        }
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace flab
