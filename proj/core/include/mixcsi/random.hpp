// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The mixcsi authors

#pragma once

#include "mixcsi/linalg.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace mixcsi {

using Rng = std::mt19937_64;

// Streams derived from one root seed. Each stream gets its own generator so that
// results never depend on evaluation order or thread count.
enum class Stream : std::uint64_t {
    TypeCPlacement = 1,
    TypeCCovariance = 2,
    TypeSCovariance = 3,
    Trial = 4,
};

/// SplitMix64 finalizer.
[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for element `index` of `stream` under `root`; a pure function of its arguments.
[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t root, Stream stream, std::uint64_t index) {
    return mix64(mix64(mix64(root) ^ static_cast<std::uint64_t>(stream)) + index);
}

[[nodiscard]] inline Rng make_rng(std::uint64_t root, Stream stream, std::uint64_t index) {
    return Rng{derive_seed(root, stream, index)};
}

/// CN(0, 1) sample: real and imaginary parts each N(0, 1/2).
[[nodiscard]] inline cd complex_normal(Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    const double re = n(rng);
    const double im = n(rng);
    return {re * M_SQRT1_2, im * M_SQRT1_2};
}

[[nodiscard]] inline CVector complex_normal_vector(Eigen::Index size, Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    CVector v(size);
    for (Eigen::Index i = 0; i < size; ++i) {
        const double re = n(rng);
        const double im = n(rng);
        v(i) = {re * M_SQRT1_2, im * M_SQRT1_2};
    }
    return v;
}

} // namespace mixcsi
