#pragma once

// Deterministic random helpers. std::uniform_int_distribution and
// std::normal_distribution are implementation-defined, so every draw here is
// built directly on mt19937_64 output to keep results identical across
// platforms and standard libraries.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace coordfit::rng {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline Engine seeded(std::uint64_t seed) { return Engine(seed); }

// Independent stream for (seed, stream); used so per-iteration work cannot
// depend on scheduling order.
inline Engine seeded_stream(std::uint64_t seed, std::uint64_t stream) {
    return Engine(splitmix64(seed ^ splitmix64(stream + 1)));
}

// Uniform integer in [0, n), rejection sampled.
inline std::uint64_t bounded(Engine& g, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = g();
    } while (x >= limit);
    return x % n;
}

// Uniform in [0, 1) with 53-bit resolution.
inline double uniform01(Engine& g) {
    return double(g() >> 11) * 0x1.0p-53;
}

inline double uniform(Engine& g, double a, double b) {
    return a + (b - a) * uniform01(g);
}

// Standard normal via Box-Muller; two uniforms per draw, no cached spare.
inline double normal(Engine& g) {
    double u1 = uniform01(g);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = uniform01(g);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Fisher-Yates over the first k slots; [0,k) afterwards holds a uniform
// sample without replacement.
template <typename T>
void partial_shuffle(std::vector<T>& v, std::size_t k, Engine& g) {
    const std::size_t n = v.size();
    if (n == 0) return;
    if (k > n) k = n;
    for (std::size_t i = 0; i + 1 < n && i < k; ++i) {
        const std::size_t j = i + std::size_t(bounded(g, n - i));
        std::swap(v[i], v[j]);
    }
}

} // namespace coordfit::rng
