#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace sweet {

using Rng = std::mt19937_64;

// Independent, reproducible generator for one purpose (data order, masks,
// width sampling, init) derived from a run seed.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x5eedu};
    return Rng(seq);
}

// Stream ids, so one run seed fans out into fixed sub-generators.
namespace streams {
inline constexpr std::uint64_t init = 1;
inline constexpr std::uint64_t data = 2;
inline constexpr std::uint64_t mask = 3;
inline constexpr std::uint64_t width = 4;
inline constexpr std::uint64_t validation = 5;
inline constexpr std::uint64_t synth = 6;
inline constexpr std::uint64_t probe = 7;
}  // namespace streams

inline void fill_normal(std::span<double> out, Rng& rng, double mean = 0.0, double stddev = 1.0) {
    std::normal_distribution<double> dist(mean, stddev);
    for (double& v : out) v = dist(rng);
}

inline void fill_uniform(std::span<double> out, Rng& rng, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : out) v = dist(rng);
}

}  // namespace sweet
