#pragma once

// Seeded random draws with a fixed algorithm, so simulated universes and
// sampled anchors are reproducible across standard library implementations.

#include <cstddef>
#include <cstdint>
#include <random>

namespace trendcal {

// splitmix64 finalizer, used to derive independent sub-seeds from one seed.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform in {0, ..., n-1}, unbiased.
    std::size_t index(std::size_t n);

    // Standard normal via Box-Muller.
    double normal();

private:
    std::mt19937_64 engine_;
};

}  // namespace trendcal
