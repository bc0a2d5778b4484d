// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The mixcsi authors

#include "mixcsi/precoding.hpp"

#include "mixcsi/errors.hpp"

#include <fmt/format.h>

#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>
#include <string>

namespace mixcsi {

namespace {

constexpr std::array<std::pair<Method, std::string_view>, 5> kMethodNames{{
    {Method::ZF, "ZF"},
    {Method::MRT, "MRT"},
    {Method::SBM, "SBM"},
    {Method::eZF, "eZF"},
    {Method::eMRT, "eMRT"},
}};

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
}

// Orthonormal basis of range(F F^H) using the eigenvalue threshold tol * lambda_max,
// i.e. singular values of F above sqrt(tol) * sigma_max.
CMatrix range_of_factor(const CMatrix& f, double tol) {
    if (f.cols() == 0) {
        return CMatrix(f.rows(), 0);
    }
    Eigen::JacobiSVD<CMatrix> svd(f, Eigen::ComputeThinU);
    const RVector& s = svd.singularValues();
    const double cut = std::sqrt(tol) * s(0);
    Eigen::Index r = 0;
    while (r < s.size() && s(r) > cut && s(r) > 0.0) {
        ++r;
    }
    return svd.matrixU().leftCols(r);
}

// Eigenvalues below this fraction of lambda_max are eigen-solver noise; factors drop them.
constexpr double kFactorFloor = 1e-14;

std::size_t nonzero_count(const EigenDecomposition& eig) {
    std::size_t d = 0;
    const double floor = kFactorFloor * eig.max_value();
    while (d < eig.dim() && eig.values(static_cast<Eigen::Index>(d)) > floor) {
        ++d;
    }
    return d;
}

// F with F F^H = A up to the noise floor, A Hermitian PSD.
CMatrix exact_factor(const EigenDecomposition& eig) {
    const auto d = static_cast<Eigen::Index>(nonzero_count(eig));
    return eig.vectors.leftCols(d) * eig.values.head(d).cwiseSqrt().cast<cd>().asDiagonal();
}

// x - Q (Q^H x), for Q with orthonormal columns.
CMatrix project_out(const CMatrix& x, const CMatrix& q) {
    if (q.cols() == 0) {
        return x;
    }
    // second pass removes the rounding remnant when x lies mostly inside range(q)
    const CMatrix once = x - q * (q.adjoint() * x);
    return once - q * (q.adjoint() * once);
}

void require_rows(const CMatrix& g_hat, std::size_t dim) {
    if (static_cast<std::size_t>(g_hat.rows()) != dim) {
        throw ValidationError(
            fmt::format("estimated channel matrix has {} rows, expected M = {}", g_hat.rows(), dim));
    }
}

// Unit-norm beam maximising the statistical power of `factor` (Phi = factor factor^H)
// inside the subspace where `outside` = P factor lives, P an orthogonal projector.
// Returns the beam and its received statistical power w^H Phi w.
// First `cols` columns of a Householder product, without forming the square matrix.
template <typename Sequence>
CMatrix thin_q(const Sequence& q, Eigen::Index rows, Eigen::Index cols) {
    CMatrix out = CMatrix::Identity(rows, cols);
    q.applyThisOnTheLeft(out);
    return out;
}

// lambda_max(c_g c_g^H + diag(s)) by block Rayleigh-Ritz, s zero-padded to the row count.
// The start block holds the leading coordinate axis (the largest entry of s) and the columns
// of c_g, which together carry almost all of the top eigenvector, so few sweeps are needed.
double top_eigenvalue(const CMatrix& c_g, const RVector& s) {
    const Eigen::Index c = c_g.rows();
    const bool axis = s.size() > 0;
    const Eigen::Index block = std::min<Eigen::Index>(c, c_g.cols() + (axis ? 1 : 0));
    if (block == 0) {
        return 0.0;
    }
    RVector diag = RVector::Zero(c);
    diag.head(s.size()) = s;
    CMatrix v = CMatrix::Zero(c, block);
    if (axis) {
        v(0, 0) = 1.0;
    }
    v.rightCols(block - (axis ? 1 : 0)) = c_g.leftCols(block - (axis ? 1 : 0));
    double previous = -1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        const Eigen::HouseholderQR<CMatrix> qr(v);
        const CMatrix basis = thin_q(qr.householderQ(), c, block);
        v = c_g * (c_g.adjoint() * basis) + diag.cast<cd>().asDiagonal() * basis;
        const Eigen::SelfAdjointEigenSolver<CMatrix> ritz(hermitian_part(basis.adjoint() * v),
                                                          Eigen::EigenvaluesOnly);
        const double value = std::max(ritz.eigenvalues().maxCoeff(), 0.0);
        if (std::abs(value - previous) <= 1e-14 * value) {
            return value;
        }
        previous = value;
    }
    return previous;
}

CVector best_beam_in_subspace(const CMatrix& outside, double lambda_ref, double tol, std::size_t user) {
    const CMatrix c = hermitian_part(outside.adjoint() * outside);
    const EigenDecomposition eig = hermitian_eig(c);
    const double lambda = eig.max_value();
    if (!(lambda > tol * lambda_ref)) {
        throw InfeasibleError(fmt::format(
            "type-S user {} is unreachable: its covariance has no energy left in the interference-free "
            "subspace (lambda_max {:.3e}, reference {:.3e})",
            user, lambda, lambda_ref));
    }
    CVector v = outside * eig.vectors.col(0);
    v /= v.norm();
    fix_phase(v);
    return v;
}

} // namespace

std::string_view to_string(Method m) {
    for (const auto& [method, name] : kMethodNames) {
        if (method == m) {
            return name;
        }
    }
    return "?";
}

std::optional<Method> parse_method(std::string_view s) {
    for (const auto& [method, name] : kMethodNames) {
        if (iequals(s, name)) {
            return method;
        }
    }
    return std::nullopt;
}

TypeSStatistics::TypeSStatistics(std::span<const CMatrix> phi_s, std::size_t dim, StatisticsOptions opts)
    : dim_(dim), opts_(opts) {
    if (dim < 1) {
        throw ValidationError("antenna count M must be at least 1");
    }
    if (!(opts.rank_tol > 0.0 && opts.rank_tol < 1.0)) {
        throw ValidationError(fmt::format("rank tolerance must lie in (0, 1), got {}", opts.rank_tol));
    }
    if (!(opts.energy_fraction > 0.0 && opts.energy_fraction <= 1.0)) {
        throw ValidationError(fmt::format("energy fraction must lie in (0, 1], got {}", opts.energy_fraction));
    }

    users_.resize(phi_s.size());
    for (std::size_t n = 0; n < phi_s.size(); ++n) {
        const CMatrix& phi = phi_s[n];
        if (static_cast<std::size_t>(phi.rows()) != dim || static_cast<std::size_t>(phi.cols()) != dim) {
            throw ValidationError(
                fmt::format("type-S covariance {} is {}x{}, expected {}x{}", n, phi.rows(), phi.cols(), dim, dim));
        }
        require_hermitian(phi, "type-S covariance");
        const EigenDecomposition eig = hermitian_eig(phi);
        if (!(eig.max_value() > 0.0)) {
            throw ValidationError(fmt::format("type-S covariance {} is zero", n));
        }
        User& u = users_[n];
        u.lambda_max = eig.max_value();
        u.u_max = eig.vectors.col(0);

        const std::size_t rank = numerical_rank(eig, opts.rank_tol);
        u.target_rank = rank;
        if (opts.energy_fraction < 1.0) {
            u.target_rank = std::min(rank, energy_rank(eig, opts.energy_fraction));
        }
        if (u.target_rank == rank) {
            u.phi = phi;
            u.factor = exact_factor(eig);
        } else {
            const auto d = static_cast<Eigen::Index>(u.target_rank);
            u.factor = eig.vectors.leftCols(d) * eig.values.head(d).cwiseSqrt().cast<cd>().asDiagonal();
            u.phi = hermitian_part(u.factor * u.factor.adjoint());
        }
    }

    const auto rows = static_cast<Eigen::Index>(dim);
    CMatrix total = CMatrix::Zero(rows, rows);
    for (const User& u : users_) {
        total += u.phi;
    }
    if (users_.empty()) {
        occupied_ = CMatrix(rows, 0);
    } else {
        const EigenDecomposition eig = hermitian_eig(total);
        occupied_ = eig.vectors.leftCols(static_cast<Eigen::Index>(numerical_rank(eig, opts.rank_tol)));
    }

    for (std::size_t n = 0; n < users_.size(); ++n) {
        User& u = users_[n];
        if (users_.size() == 1) {
            u.others_basis = CMatrix(rows, 0);
            u.others_coords = CMatrix(0, u.factor.cols());
            continue;
        }
        const EigenDecomposition eig = hermitian_eig(hermitian_part(total - u.phi));
        const auto d = static_cast<Eigen::Index>(nonzero_count(eig));
        u.others_basis = eig.vectors.leftCols(d);
        u.others_values = eig.values.head(d);
        u.others_coords = u.others_basis.adjoint() * u.factor;
    }
}

CMatrix TypeSStatistics::project_off_occupied(const CMatrix& g_hat) const {
    require_rows(g_hat, dim_);
    const auto r1 = static_cast<std::size_t>(occupied_.cols());
    const auto k = static_cast<std::size_t>(g_hat.cols());
    if (r1 == dim_ && !users_.empty()) {
        throw InfeasibleError(fmt::format(
            "type-S covariances span all {} antennas (r_1 = M), no null space is left for type-C users; "
            "apply low_rank_approx to the type-S covariances (energy_fraction < 1)",
            dim_));
    }
    if (dim_ - r1 < k) {
        throw InfeasibleError(fmt::format(
            "null space of the type-S covariances has dimension M - r_1 = {} - {} = {}, fewer than K = {} type-C users",
            dim_, r1, dim_ - r1, k));
    }
    return project_out(g_hat, occupied_);
}

CMatrix TypeSStatistics::ezf_type_c(const CMatrix& g_hat, double rho) const {
    const CMatrix g_perp = project_off_occupied(g_hat);
    // U_1 [0; pinv(G2)] = P G (G^H P G)^{-1} with P the projector off range(Phi_S).
    return zf_baseline(g_perp, rho);
}

CMatrix TypeSStatistics::emrt_type_c(const CMatrix& g_hat, double p_d) const {
    const CMatrix g_perp = project_off_occupied(g_hat);
    for (Eigen::Index k = 0; k < g_perp.cols(); ++k) {
        const double before = g_hat.col(k).norm();
        const double after = g_perp.col(k).norm();
        if (!(after > opts_.rank_tol * before)) {
            throw InfeasibleError(fmt::format(
                "type-C user {} lies entirely inside the type-S subspace (projected norm {:.3e} of {:.3e})", k,
                after, before));
        }
    }
    return mrt_baseline(g_perp, p_d);
}

// Removes from Phi_S,n's factor the numerical range of Q = G G^H + sum_{i != n} Phi_S,i.
// Q lives in span[O, Q_g], O the others' eigenbasis and Q_g an orthonormal basis of G off O,
// so everything runs in those compressed coordinates. range(G) is removed exactly; the others
// are projected off range(G) and their directions above rank_tol * lambda_max(Q) removed too.
// Returns the projected factor and r_2 = rank(Q).
std::pair<CMatrix, std::size_t> TypeSStatistics::project_off_interference(const CMatrix& g_hat,
                                                                         const User& u) const {
    const CMatrix& o = u.others_basis;
    const Eigen::Index rows = g_hat.rows();
    const Eigen::Index k = g_hat.cols();
    const Eigen::Index r_o = o.cols();

    CMatrix a = o.adjoint() * g_hat;
    CMatrix g_perp = g_hat - o * a;
    const CMatrix again = o.adjoint() * g_perp;
    g_perp.noalias() -= o * again;
    a += again;

    const double scale = std::max(g_hat.norm(), std::numeric_limits<double>::min());
    Eigen::Index r_g = 0;
    CMatrix q_g(rows, 0);
    if (k > 0) {
        Eigen::ColPivHouseholderQR<CMatrix> qr(g_perp);
        const auto diag = qr.matrixQR().diagonal();
        while (r_g < std::min(rows, k) && std::abs(diag(r_g)) > kFactorFloor * scale) {
            ++r_g;
        }
        q_g = thin_q(qr.householderQ(), rows, r_g);
    }

    const Eigen::Index c = r_o + r_g;
    if (c == 0) {
        return {u.factor, 0};
    }
    // coordinates of G and of the others' square-root factor
    CMatrix c_g(c, k);
    c_g.topRows(r_o) = a;
    c_g.bottomRows(r_g) = q_g.adjoint() * g_hat;
    CMatrix y_o = CMatrix::Zero(c, r_o);
    y_o.topRows(r_o) = u.others_values.cwiseSqrt().cast<cd>().asDiagonal();

    const double q_max = top_eigenvalue(c_g, u.others_values);

    // orthonormal basis of range(G) in coordinates
    Eigen::Index r_c = 0;
    CMatrix basis_g(c, 0);
    if (k > 0) {
        Eigen::ColPivHouseholderQR<CMatrix> qr(c_g);
        const auto diag = qr.matrixQR().diagonal();
        while (r_c < std::min(c, k) && std::abs(diag(r_c)) > kFactorFloor * scale) {
            ++r_c;
        }
        basis_g = thin_q(qr.householderQ(), c, r_c);
    }
    y_o -= basis_g * (basis_g.adjoint() * y_o);
    y_o -= basis_g * (basis_g.adjoint() * y_o);
    const EigenDecomposition eig = hermitian_eig(hermitian_part(y_o * y_o.adjoint()));
    Eigen::Index r_s = 0;
    while (r_s < eig.values.size() && eig.values(r_s) > opts_.rank_tol * q_max) {
        ++r_s;
    }
    CMatrix z(c, r_c + r_s);
    z.leftCols(r_c) = basis_g;
    if (r_s > 0) {
        CMatrix kept = eig.vectors.leftCols(r_s);
        kept -= basis_g * (basis_g.adjoint() * kept);
        const Eigen::HouseholderQR<CMatrix> qr(kept);
        z.rightCols(r_s) = thin_q(qr.householderQ(), c, r_s);
    }

    // factor coordinates in [O Q_g], O^H F precomputed
    CMatrix coords(c, u.factor.cols());
    coords.topRows(r_o) = u.others_coords;
    coords.bottomRows(r_g) = q_g.adjoint() * u.factor;
    const CMatrix removed = z * (z.adjoint() * coords);
    CMatrix outside = u.factor;
    outside.noalias() -= o * removed.topRows(r_o);
    outside.noalias() -= q_g * removed.bottomRows(r_g);
    return {std::move(outside), static_cast<std::size_t>(r_c + r_s)};
}

CVector TypeSStatistics::ezf_type_s(const CMatrix& g_hat, std::size_t n, double rho) const {
    require_rows(g_hat, dim_);
    if (!(rho > 0.0)) {
        throw ValidationError(fmt::format("rho must be positive, got {}", rho));
    }
    const User& u = users_.at(n);
    const auto [outside, r2] = project_off_interference(g_hat, u);
    if (r2 >= dim_) {
        throw InfeasibleError(fmt::format(
            "no null space left for type-S user {}: estimated type-C channels and other type-S covariances "
            "span r_2 = {} of M = {} dimensions; apply low_rank_approx to the type-S covariances",
            n, r2, dim_));
    }
    const CVector v = best_beam_in_subspace(outside, u.lambda_max, opts_.rank_tol, n);
    const double power = v.dot(u.phi * v).real();
    return v * std::sqrt(rho / power);
}

CVector TypeSStatistics::emrt_type_s(const CMatrix& g_hat, std::size_t n, double p_d) const {
    return emrt_beam(channel_range(g_hat), n, p_d);
}

CMatrix TypeSStatistics::channel_range(const CMatrix& g_hat) const {
    require_rows(g_hat, dim_);
    const auto k = static_cast<std::size_t>(g_hat.cols());
    if (k >= dim_) {
        throw InfeasibleError(fmt::format("K = {} type-C users leave no null space in M = {} antennas", k, dim_));
    }
    CMatrix q = range_of_factor(g_hat, opts_.rank_tol);
    if (static_cast<std::size_t>(q.cols()) < k) {
        throw InfeasibleError(
            fmt::format("estimated type-C channel matrix is rank deficient (rank {} < K = {})", q.cols(), k));
    }
    return q;
}

CVector TypeSStatistics::emrt_beam(const CMatrix& channel_range, std::size_t n, double p_d) const {
    if (!(p_d > 0.0)) {
        throw ValidationError(fmt::format("p_d must be positive, got {}", p_d));
    }
    const User& u = users_.at(n);
    const CMatrix outside = project_out(u.factor, channel_range);
    return best_beam_in_subspace(outside, u.lambda_max, opts_.rank_tol, n) * std::sqrt(p_d);
}

PrecoderSet TypeSStatistics::build(Method method, const CMatrix& g_hat, const PowerParams& power) const {
    PrecoderSet out;
    out.method = method;
    out.power = power;
    const auto rows = static_cast<Eigen::Index>(dim_);
    const auto n_users = static_cast<Eigen::Index>(users_.size());
    switch (method) {
    case Method::ZF:
        out.w_c = zf_baseline(g_hat, power.rho);
        out.w_s = CMatrix(rows, 0);
        break;
    case Method::MRT:
        out.w_c = mrt_baseline(g_hat, power.p_d);
        out.w_s = CMatrix(rows, 0);
        break;
    case Method::SBM:
        out.w_c = mrt_baseline(g_hat, power.p_d);
        out.w_s.resize(rows, n_users);
        for (Eigen::Index n = 0; n < n_users; ++n) {
            out.w_s.col(n) = users_[static_cast<std::size_t>(n)].u_max * std::sqrt(power.p_d);
        }
        break;
    case Method::eZF:
        out.w_c = ezf_type_c(g_hat, power.rho);
        out.w_s.resize(rows, n_users);
        for (Eigen::Index n = 0; n < n_users; ++n) {
            out.w_s.col(n) = ezf_type_s(g_hat, static_cast<std::size_t>(n), power.rho);
        }
        break;
    case Method::eMRT: {
        out.w_c = emrt_type_c(g_hat, power.p_d);
        out.w_s.resize(rows, n_users);
        const CMatrix range = n_users > 0 ? channel_range(g_hat) : CMatrix(rows, 0);
        for (Eigen::Index n = 0; n < n_users; ++n) {
            out.w_s.col(n) = emrt_beam(range, static_cast<std::size_t>(n), power.p_d);
        }
        break;
    }
    }
    return out;
}

CMatrix mrt_baseline(const CMatrix& g_hat, double p_d) {
    if (!(p_d > 0.0)) {
        throw ValidationError(fmt::format("p_d must be positive, got {}", p_d));
    }
    CMatrix w(g_hat.rows(), g_hat.cols());
    const double amp = std::sqrt(p_d);
    for (Eigen::Index k = 0; k < g_hat.cols(); ++k) {
        const double norm = g_hat.col(k).norm();
        if (!(norm > 0.0)) {
            throw ValidationError(fmt::format("MRT: estimated channel of user {} is zero", k));
        }
        w.col(k) = g_hat.col(k) * (amp / norm);
    }
    return w;
}

CMatrix zf_baseline(const CMatrix& g_hat, double rho) {
    if (!(rho > 0.0)) {
        throw ValidationError(fmt::format("rho must be positive, got {}", rho));
    }
    return pseudo_inverse(g_hat) * std::sqrt(rho);
}

PrecoderSet sbm_precoders(const CMatrix& g_hat, std::span<const CMatrix> phi_s, double p_d) {
    const TypeSStatistics stats(phi_s, static_cast<std::size_t>(g_hat.rows()));
    return stats.build(Method::SBM, g_hat, {p_d, p_d});
}

CMatrix ezf_typeC(const CMatrix& g_hat, std::span<const CMatrix> phi_s, double rho, double rank_tol) {
    const TypeSStatistics stats(phi_s, static_cast<std::size_t>(g_hat.rows()), {rank_tol, 1.0});
    return stats.ezf_type_c(g_hat, rho);
}

CVector ezf_typeS(const CMatrix& g_hat, std::span<const CMatrix> phi_s, std::size_t n, double rho,
                  double rank_tol) {
    if (n >= phi_s.size()) {
        throw ValidationError(fmt::format("type-S user index {} out of range (N = {})", n, phi_s.size()));
    }
    const TypeSStatistics stats(phi_s, static_cast<std::size_t>(g_hat.rows()), {rank_tol, 1.0});
    return stats.ezf_type_s(g_hat, n, rho);
}

CMatrix emrt_typeC(const CMatrix& g_hat, std::span<const CMatrix> phi_s, double p_d, double rank_tol) {
    const TypeSStatistics stats(phi_s, static_cast<std::size_t>(g_hat.rows()), {rank_tol, 1.0});
    return stats.emrt_type_c(g_hat, p_d);
}

CVector emrt_typeS(const CMatrix& g_hat, const CMatrix& phi_s_n, double p_d, double rank_tol) {
    const TypeSStatistics stats(std::span<const CMatrix>(&phi_s_n, 1), static_cast<std::size_t>(g_hat.rows()),
                                {rank_tol, 1.0});
    return stats.emrt_type_s(g_hat, 0, p_d);
}

} // namespace mixcsi
