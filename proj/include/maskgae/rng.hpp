#pragma once

#include <cassert>
#include <cstdint>
#include <random>

namespace maskgae {

// Deterministic PRNG facade around mt19937_64. The std distribution objects
// are implementation-defined, so every draw goes through explicit
// constructions here and results are reproducible across compilers.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Unbiased integer in [0, n) via rejection sampling.
    std::uint64_t uniform_index(std::uint64_t n) {
        assert(n > 0);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    // Double in [0, 1) built from the top 53 bits.
    double uniform_real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    float uniform_float(float lo, float hi) {
        return lo + static_cast<float>(uniform_real()) * (hi - lo);
    }

private:
    std::mt19937_64 engine_;
};

// Mixes (seed, stream) into an independent sub-seed, e.g. one per epoch.
// splitmix64 finalizer.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace maskgae
