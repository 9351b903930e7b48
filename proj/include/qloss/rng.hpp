#pragma once

#include <cstdint>

namespace qloss {

// Counter-based RNG: every (seed, stream) pair yields an independent
// deterministic substream, so shot batches can be partitioned across
// workers without changing results.
struct Rng {
    uint64_t state;

    static uint64_t mix(uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    explicit Rng(uint64_t seed, uint64_t stream = 0)
        : state(mix(mix(seed) ^ mix(stream * 0xda942042e4dd58b5ULL + 1))) {}

    uint64_t next_u64() {
        state += 0x9e3779b97f4a7c15ULL;
        uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    bool next_bool() { return next_u64() >> 63; }

    // Uniform double in [0, 1).
    double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) {
        if (p <= 0.0) return false;
        if (p >= 1.0) return true;
        return next_double() < p;
    }

    uint64_t next_below(uint64_t n) { return n ? next_u64() % n : 0; }
};

}  // namespace qloss
