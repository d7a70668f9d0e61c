// Copyright (C) 2026 The latcorr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

#include "latcorr/grid.hpp"

namespace latcorr {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// FNV-1a, 64 bit. Stable across platforms and runs.
inline std::uint64_t stable_hash(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Derive an independent stream seed from a parent seed and a salt.
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t salt) noexcept {
    return splitmix64(parent ^ splitmix64(salt));
}

inline std::uint64_t derive_seed(std::uint64_t parent, std::string_view salt) noexcept {
    return derive_seed(parent, stable_hash(salt));
}

// Standard-normal source built on mt19937_64 with Box-Muller, so the stream
// is identical on every standard library (std::normal_distribution is not).
class NormalSource {
public:
    explicit NormalSource(std::uint64_t seed) : engine_(seed) {}

    double next() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

inline LatentGrid normal_grid(std::size_t channels, std::size_t height, std::size_t width, std::uint64_t seed) {
    LatentGrid g(channels, height, width);
    NormalSource src(seed);
    for (double& v : g.data()) v = src.next();
    return g;
}

inline LatentGrid normal_like(const LatentGrid& shape, std::uint64_t seed) {
    return normal_grid(shape.channels(), shape.height(), shape.width(), seed);
}

}  // namespace latcorr
