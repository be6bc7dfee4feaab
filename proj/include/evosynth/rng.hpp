#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace evo {

// Uniform double in the open interval (0,1). Implemented by hand instead of
// std::uniform_real_distribution so the stream is identical across standard
// library implementations: (x + 0.5) * 2^-52 with x the top 52 bits of one
// mt19937_64 output. Smallest value 2^-53, largest 1 - 2^-53.
inline double uniform_open01(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 12) + 0.5) * 0x1.0p-52;
}

// Uniform integer in [0, n). Modulo bias is irrelevant at our scales and the
// result is reproducible everywhere, unlike std::uniform_int_distribution.
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    return static_cast<std::size_t>(rng() % n);
}

// Portable Fisher-Yates (std::shuffle is implementation-defined).
template <typename T>
void deterministic_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = uniform_index(rng, i);
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace evo
