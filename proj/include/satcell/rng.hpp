// SPDX-License-Identifier: Apache-2.0
//
// satcell: uplink simulation and power control for integrated
// satellite + cell-free terrestrial networks.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#ifndef SATCELL_RNG_HPP
#define SATCELL_RNG_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace satcell {

// splitmix64 finalizer; the mixing primitive behind all seed derivation.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives a child seed from (master, tag words). Every randomized unit of
// work (drop, trial, stream) gets its own derived seed, so units are
// reproducible independently of execution order.
constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::initializer_list<std::uint64_t> words) {
    std::uint64_t s = mix64(master);
    for (std::uint64_t w : words)
        s = mix64(s ^ (w + 0x9e3779b97f4a7c15ULL));
    return s;
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a) {
    return derive_seed(master, {a});
}
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                    std::uint64_t b) {
    return derive_seed(master, {a, b});
}

// Deterministic random stream. mt19937_64 output is fixed by the standard
// and the Gaussian draws use explicit Box-Muller on raw 53-bit uniforms,
// so a given seed produces the same bits on every platform.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; safe as a log() argument.
    double uniform_pos() {
        return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::uint64_t next_u64() { return engine_(); }

    // Standard normal via Box-Muller, one spare cached.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
        const double phi = two_pi() * uniform();
        spare_ = r * std::sin(phi);
        has_spare_ = true;
        return r * std::cos(phi);
    }

    // Circularly symmetric complex normal CN(0, 1): E|z|^2 = 1.
    std::complex<double> cgaussian() {
        const double r = std::sqrt(-std::log(uniform_pos()));
        const double phi = two_pi() * uniform();
        return {r * std::cos(phi), r * std::sin(phi)};
    }

  private:
    static constexpr double two_pi() { return 6.283185307179586476925286766559; }

    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace satcell

#endif
