// Copyright Contributors to the wrfgs Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace wrfgs {

// Counter-based pseudo-random stream (splitmix64 chain). The entire state is
// two u64 words, so RNG state serializes trivially into checkpoints and any
// draw can be re-derived from (seed, purpose, indices) without replaying
// history. Not cryptographic; statistical quality is plenty for init,
// shuffles and jitter.
struct Rng {
    uint64_t state = 0x9e3779b97f4a7c15ull;

    explicit Rng(uint64_t seed = 0) { state = seed * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull; }

    static uint64_t mix(uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    uint64_t next_u64() {
        state += 0x9e3779b97f4a7c15ull;
        uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 significant bits.
    double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    uint64_t uniform_index(uint64_t n) { return n ? next_u64() % n : 0; }

    // Box-Muller, two fresh uniforms per call (no cached spare, keeps the
    // draw count deterministic and resume-safe).
    double normal() {
        double u1 = uniform01(), u2 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }
};

// Derive an independent stream keyed by a purpose tag and indices.
inline Rng derive_rng(uint64_t seed, std::string_view tag, uint64_t a = 0, uint64_t b = 0) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (char c : tag) h = (h ^ uint64_t(uint8_t(c))) * 0x100000001b3ull;
    h = Rng::mix(h ^ Rng::mix(seed));
    h = Rng::mix(h ^ Rng::mix(a + 0x51ed2701));
    h = Rng::mix(h ^ Rng::mix(b + 0x2c9277b5));
    Rng r(0);
    r.state = h;
    return r;
}

}  // namespace wrfgs
