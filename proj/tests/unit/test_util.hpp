// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The mixcsi authors

#pragma once

#include "mixcsi/linalg.hpp"
#include "mixcsi/random.hpp"

#include <cstdint>

namespace mixcsi::test {

inline CMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    CMatrix a(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        a.col(j) = complex_normal_vector(rows, rng);
    }
    return a;
}

inline CMatrix random_hermitian(Eigen::Index n, Rng& rng) {
    const CMatrix a = random_matrix(n, n, rng);
    return hermitian_part(a + a.adjoint());
}

/// B B^H with B of size n x rank.
inline CMatrix random_psd(Eigen::Index n, Eigen::Index rank, Rng& rng) {
    const CMatrix b = random_matrix(n, rank, rng);
    return hermitian_part(b * b.adjoint());
}

inline double max_abs(const CMatrix& a) {
    return a.size() ? a.cwiseAbs().maxCoeff() : 0.0;
}

} // namespace mixcsi::test
