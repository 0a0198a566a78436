#ifndef HINTS_RNG_HPP
#define HINTS_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace hints {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// All randomness in the library flows from one root seed. Each consumer
// derives its own stream keyed by a stage name ("stage1.init",
// "stage2.shuffle", ...), so stages are individually reproducible and
// adding a consumer never shifts another consumer's stream.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view stream) {
    return splitmix64(root ^ splitmix64(fnv1a64(stream)));
}

inline std::mt19937_64 make_rng(std::uint64_t root, std::string_view stream) {
    return std::mt19937_64(derive_seed(root, stream));
}

// Uniform in [0,1) from the top 53 bits; bit-stable across standard
// library versions, unlike std::uniform_real_distribution.
inline double uniform01(std::mt19937_64& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& g, double lo, double hi) {
    return lo + (hi - lo) * uniform01(g);
}

// Box-Muller standard normal.
inline double gauss(std::mt19937_64& g) {
    double u1;
    do {
        u1 = uniform01(g);
    } while (u1 <= 0.0);
    const double u2 = uniform01(g);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

} // namespace hints

#endif
