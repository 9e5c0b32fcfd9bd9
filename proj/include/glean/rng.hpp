#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

// Deterministic randomness. Every stochastic site in the engine derives its
// own stream from the single run seed plus a stable site name, so enabling or
// disabling one component never shifts the draws of another. Distribution
// sampling is hand-rolled (not std::uniform_int_distribution and friends)
// to keep byte-identical results across standard libraries.

namespace glean {

constexpr std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, std::string_view site) {
    return splitmix64(root ^ fnv1a64(site));
}

inline std::uint64_t derive_seed(std::uint64_t root, std::string_view site, std::uint64_t index) {
    return splitmix64(splitmix64(root ^ fnv1a64(site)) + index);
}

// xoshiro-free minimal generator: splitmix64 stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Unbiased draw in [0, bound) via rejection.
    std::uint64_t next_below(std::uint64_t bound) {
        if (bound <= 1) return 0;
        const std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % bound) - 1;
        std::uint64_t v = next_u64();
        while (v > limit) v = next_u64();
        return v % bound;
    }

    // Uniform in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller (no cached spare; one draw per call).
    double next_gaussian() {
        double u1 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

}  // namespace glean
