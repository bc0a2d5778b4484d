// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The mixcsi authors

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>

namespace mixcsi {

using cd = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

// Relative tolerances shared by every kernel in this header.
inline constexpr double kHermitianTol = 1e-12; // max |A_ij - conj(A_ji)| / max |A_ij|
inline constexpr double kPsdTol = 1e-10;       // eigenvalues >= -kPsdTol * lambda_max
inline constexpr double kRankTol = 1e-9;       // value counts as zero below kRankTol * largest
inline constexpr double kTieTol = 1e-12;       // eigenvalue ties, relative to lambda_max

/// Eigenpairs of a Hermitian matrix.
///
/// `values` are sorted non-increasing and column i of `vectors` belongs to
/// `values[i]`. Each column is scaled so that its largest-magnitude entry is
/// real and positive. Inside a cluster of tied eigenvalues the columns are
/// ordered by the real part of their first nonzero entry, descending, then by
/// the next entry, and so on.
struct EigenDecomposition {
    RVector values;
    CMatrix vectors;

    [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(values.size()); }
    [[nodiscard]] double max_value() const { return values.size() ? values(0) : 0.0; }
    [[nodiscard]] CMatrix reconstruct() const;
};

/// Largest |A_ij - conj(A_ji)|, relative to the largest |A_ij| (0 for the zero matrix).
[[nodiscard]] double relative_asymmetry(const CMatrix& a);

/// Throws ValidationError carrying the asymmetry when `a` is not Hermitian within kHermitianTol.
void require_hermitian(const CMatrix& a, const char* what = "matrix");

/// Returns (A + A^H) / 2.
[[nodiscard]] CMatrix hermitian_part(const CMatrix& a);

[[nodiscard]] EigenDecomposition hermitian_eig(const CMatrix& a);

/// Number of eigenvalues above `tol * lambda_max`; 0 for the zero matrix.
[[nodiscard]] std::size_t numerical_rank(const EigenDecomposition& eig, double tol = kRankTol);

/// A (A^H A)^{-1} for a tall full-column-rank A, evaluated through a thin SVD.
[[nodiscard]] CMatrix pseudo_inverse(const CMatrix& g, double tol = kRankTol);

/// Hermitian PSD square root. Eigenvalues in [-kPsdTol*lambda_max, 0) are clamped to zero.
[[nodiscard]] CMatrix psd_sqrt(const CMatrix& a);

/// Same as psd_sqrt(eig.reconstruct()) without redoing the decomposition.
[[nodiscard]] CMatrix psd_sqrt(const EigenDecomposition& eig);

/// Which closed form to use for E{tr(ZA) tr(ZB)} with Z = hh^H, h ~ CN(0, I).
enum class FourthMoment {
    /// tr(A)tr(B) + tr(AB) - tr(D(A)D(B)), the form the SBM closed-form rates were derived with.
    WithDiagonalCorrection,
    /// tr(A)tr(B) + tr(AB), the circularly-symmetric Gaussian moment.
    Circular,
};

/// Fourth-moment functional F(A, B). Square matrices of equal size.
[[nodiscard]] cd quad_form_expectation_F(const CMatrix& a, const CMatrix& b,
                                         FourthMoment form = FourthMoment::WithDiagonalCorrection);

/// Second-order approximation of E{V1/V2}:
/// E1/E2 - Cov(V1,V2)/E2^2 + Var(V2) E1/E2^3.
[[nodiscard]] double mean_ratio_approx(double e1, double e2, double cov12, double var2);

/// Best rank-`rank` approximation of a Hermitian PSD matrix (Frobenius norm).
[[nodiscard]] CMatrix low_rank_approx(const CMatrix& a, std::size_t rank);

/// Smallest D such that the top-D eigenvalues carry at least `fraction` of the trace.
[[nodiscard]] std::size_t energy_rank(const EigenDecomposition& eig, double fraction);

/// Puts v's largest-magnitude entry on the positive real axis.
void fix_phase(Eigen::Ref<CVector> v);

/// Relative Frobenius error ||a - b||_F / ||b||_F (absolute when b = 0).
[[nodiscard]] double rel_frobenius_error(const CMatrix& a, const CMatrix& b);

/// Orthonormal basis of span(a), columns with singular value above tol * largest are kept.
[[nodiscard]] CMatrix orthonormal_range(const CMatrix& a, double tol = kRankTol);

} // namespace mixcsi
