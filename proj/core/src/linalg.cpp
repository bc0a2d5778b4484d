// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The mixcsi authors

#include "mixcsi/linalg.hpp"

#include "mixcsi/errors.hpp"

#include <fmt/format.h>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace mixcsi {

namespace {

void require_square(const CMatrix& a, const char* what) {
    if (a.rows() != a.cols()) {
        throw ValidationError(fmt::format("{} must be square, got {}x{}", what, a.rows(), a.cols()));
    }
}

// Lexicographic "greater" on real parts, entries closer than tol compare equal.
bool real_parts_greater(const CVector& a, const CVector& b, double tol) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double x = a(i).real();
        const double y = b(i).real();
        if (std::abs(x - y) > tol) {
            return x > y;
        }
    }
    return false;
}

} // namespace

CMatrix EigenDecomposition::reconstruct() const {
    return vectors * values.cast<cd>().asDiagonal() * vectors.adjoint();
}

double relative_asymmetry(const CMatrix& a) {
    const double scale = a.size() ? a.cwiseAbs().maxCoeff() : 0.0;
    if (scale == 0.0) {
        return 0.0;
    }
    return (a - a.adjoint()).cwiseAbs().maxCoeff() / scale;
}

void require_hermitian(const CMatrix& a, const char* what) {
    require_square(a, what);
    const double asym = relative_asymmetry(a);
    if (asym > kHermitianTol) {
        throw ValidationError(
            fmt::format("{} is not Hermitian: max relative asymmetry {:.3e} exceeds {:.0e}", what, asym,
                        kHermitianTol));
    }
}

CMatrix hermitian_part(const CMatrix& a) {
    return (a + a.adjoint()) * 0.5;
}

void fix_phase(Eigen::Ref<CVector> v) {
    if (v.size() == 0) {
        return;
    }
    Eigen::Index imax = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        // strict > keeps the first index among equal magnitudes
        const double mag = std::abs(v(i));
        if (mag > best * (1.0 + 1e-12)) {
            best = mag;
            imax = i;
        }
    }
    if (best > 0.0) {
        v *= std::conj(v(imax)) / best;
    }
}

EigenDecomposition hermitian_eig(const CMatrix& a) {
    require_hermitian(a, "hermitian_eig input");
    const auto n = a.rows();
    EigenDecomposition out;
    if (n == 0) {
        return out;
    }

    Eigen::SelfAdjointEigenSolver<CMatrix> solver(hermitian_part(a));
    if (solver.info() != Eigen::Success) {
        throw InfeasibleError("hermitian_eig: eigen solver did not converge");
    }

    // Eigen returns ascending order.
    const RVector& ev = solver.eigenvalues();
    CMatrix vec = solver.eigenvectors();
    for (Eigen::Index j = 0; j < n; ++j) {
        fix_phase(vec.col(j));
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::reverse(order.begin(), order.end());

    const double scale = std::max(std::abs(ev.maxCoeff()), std::abs(ev.minCoeff()));
    const double tie = kTieTol * scale;
    // Values are already descending, so ties are contiguous runs.
    for (std::size_t begin = 0; begin < order.size();) {
        std::size_t end = begin + 1;
        while (end < order.size() && std::abs(ev(order[begin]) - ev(order[end])) <= tie) {
            ++end;
        }
        if (end - begin > 1) {
            std::stable_sort(order.begin() + static_cast<std::ptrdiff_t>(begin),
                             order.begin() + static_cast<std::ptrdiff_t>(end),
                             [&](Eigen::Index x, Eigen::Index y) {
                                 return real_parts_greater(vec.col(x), vec.col(y), 1e-12);
                             });
        }
        begin = end;
    }

    out.values.resize(n);
    out.vectors.resize(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        out.values(j) = ev(order[static_cast<std::size_t>(j)]);
        out.vectors.col(j) = vec.col(order[static_cast<std::size_t>(j)]);
    }
    return out;
}

std::size_t numerical_rank(const EigenDecomposition& eig, double tol) {
    const double top = eig.max_value();
    if (!(top > 0.0)) {
        return 0;
    }
    std::size_t r = 0;
    for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
        if (eig.values(i) > tol * top) {
            ++r;
        }
    }
    return r;
}

CMatrix pseudo_inverse(const CMatrix& g, double tol) {
    if (g.rows() < g.cols()) {
        throw ValidationError(fmt::format("pseudo_inverse needs a tall matrix, got {}x{}", g.rows(), g.cols()));
    }
    if (g.cols() == 0) {
        return CMatrix(g.rows(), 0);
    }
    Eigen::JacobiSVD<CMatrix> svd(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const RVector& s = svd.singularValues();
    const double ratio = s(s.size() - 1) / s(0);
    if (!(s(0) > 0.0) || !(ratio > tol)) {
        throw InfeasibleError(fmt::format(
            "pseudo_inverse: matrix is rank deficient (smallest/largest singular value = {:.3e}, threshold {:.0e})",
            s(0) > 0.0 ? ratio : 0.0, tol));
    }
    // G (G^H G)^{-1} = U S^{-1} V^H, without squaring the condition number
    return svd.matrixU() * s.cwiseInverse().asDiagonal() * svd.matrixV().adjoint();
}

CMatrix psd_sqrt(const EigenDecomposition& eig) {
    const double top = eig.max_value();
    RVector root(eig.values.size());
    for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
        const double v = eig.values(i);
        if (v < -kPsdTol * std::max(top, 0.0)) {
            throw ValidationError(
                fmt::format("psd_sqrt: matrix is not PSD (eigenvalue {:.3e}, lambda_max {:.3e})", v, top));
        }
        root(i) = v > 0.0 ? std::sqrt(v) : 0.0;
    }
    return hermitian_part(eig.vectors * root.cast<cd>().asDiagonal() * eig.vectors.adjoint());
}

CMatrix psd_sqrt(const CMatrix& a) {
    return psd_sqrt(hermitian_eig(a));
}

cd quad_form_expectation_F(const CMatrix& a, const CMatrix& b, FourthMoment form) {
    require_square(a, "F(A, B): A");
    require_square(b, "F(A, B): B");
    if (a.rows() != b.rows()) {
        throw ValidationError(fmt::format("F(A, B): dimension mismatch {} vs {}", a.rows(), b.rows()));
    }
    // tr(AB) = sum_ij A_ij B_ji
    const cd tr_ab = a.cwiseProduct(b.transpose()).sum();
    cd out = a.trace() * b.trace() + tr_ab;
    if (form == FourthMoment::WithDiagonalCorrection) {
        out -= a.diagonal().cwiseProduct(b.diagonal()).sum();
    }
    return out;
}

double mean_ratio_approx(double e1, double e2, double cov12, double var2) {
    if (e2 == 0.0) {
        throw ValidationError("mean_ratio_approx: E{V2} = 0, the ratio mean is undefined");
    }
    return e1 / e2 - cov12 / (e2 * e2) + var2 * e1 / (e2 * e2 * e2);
}

CMatrix low_rank_approx(const CMatrix& a, std::size_t rank) {
    const auto dim = static_cast<std::size_t>(a.rows());
    if (rank < 1 || rank > dim) {
        throw ValidationError(fmt::format("low_rank_approx: rank {} outside [1, {}]", rank, dim));
    }
    const EigenDecomposition eig = hermitian_eig(a);
    if (rank == dim) {
        return a;
    }
    const auto d = static_cast<Eigen::Index>(rank);
    const RVector kept = eig.values.head(d).cwiseMax(0.0);
    const auto u = eig.vectors.leftCols(d);
    return hermitian_part(u * kept.cast<cd>().asDiagonal() * u.adjoint());
}

std::size_t energy_rank(const EigenDecomposition& eig, double fraction) {
    const RVector pos = eig.values.cwiseMax(0.0);
    const double total = pos.sum();
    if (!(total > 0.0)) {
        return 0;
    }
    double acc = 0.0;
    for (Eigen::Index i = 0; i < pos.size(); ++i) {
        acc += pos(i);
        if (acc >= fraction * total) {
            return static_cast<std::size_t>(i + 1);
        }
    }
    return static_cast<std::size_t>(pos.size());
}

double rel_frobenius_error(const CMatrix& a, const CMatrix& b) {
    const double ref = b.norm();
    const double diff = (a - b).norm();
    return ref > 0.0 ? diff / ref : diff;
}

CMatrix orthonormal_range(const CMatrix& a, double tol) {
    if (a.cols() == 0 || a.rows() == 0) {
        return CMatrix(a.rows(), 0);
    }
    Eigen::JacobiSVD<CMatrix> svd(a, Eigen::ComputeThinU);
    const RVector& s = svd.singularValues();
    Eigen::Index r = 0;
    while (r < s.size() && s(r) > tol * s(0)) {
        ++r;
    }
    return svd.matrixU().leftCols(r);
}

} // namespace mixcsi
