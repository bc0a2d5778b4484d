// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The mixcsi authors

#pragma once

#include "mixcsi/linalg.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace mixcsi {

enum class Method { ZF, MRT, SBM, eZF, eMRT };

[[nodiscard]] std::string_view to_string(Method m);
[[nodiscard]] std::optional<Method> parse_method(std::string_view s);
/// ZF and MRT: every served user is precoded from estimated instantaneous CSI.
[[nodiscard]] constexpr bool is_conventional(Method m) { return m == Method::ZF || m == Method::MRT; }

struct PowerParams {
    double p_d = 10.0; // per-user transmit power (linear)
    double rho = 10.0; // received-power target of the zero-forcing designs (linear)
};

// Precoders of one method for one channel draw. Columns of w_c serve type-C users,
// columns of w_s serve type-S users.
struct PrecoderSet {
    CMatrix w_c;
    CMatrix w_s;
    Method method = Method::SBM;
    PowerParams power;
};

struct StatisticsOptions {
    double rank_tol = kRankTol;
    // Each type-S covariance is replaced by its best rank-D_n approximation, D_n being the
    // smallest rank holding this fraction of the trace. 1.0 keeps the covariances as given.
    double energy_fraction = 1.0;
};

/// Subspace structure of the type-S covariances that the statistical precoders need.
/// Depends only on the covariances, so it is built once and shared by every channel draw.
class TypeSStatistics {
public:
    TypeSStatistics(std::span<const CMatrix> phi_s, std::size_t dim, StatisticsOptions opts = {});

    [[nodiscard]] std::size_t count() const { return users_.size(); }
    [[nodiscard]] std::size_t dim() const { return dim_; }
    [[nodiscard]] double rank_tol() const { return opts_.rank_tol; }

    /// Covariance the nulling constraints are written against (after any low-rank approximation).
    [[nodiscard]] const CMatrix& covariance(std::size_t n) const { return users_.at(n).phi; }
    [[nodiscard]] std::size_t target_rank(std::size_t n) const { return users_.at(n).target_rank; }
    [[nodiscard]] const CVector& top_eigvec(std::size_t n) const { return users_.at(n).u_max; }
    [[nodiscard]] double top_eigval(std::size_t n) const { return users_.at(n).lambda_max; }

    /// Orthonormal basis of range(sum_n Phi_S,n); its column count is r_1.
    [[nodiscard]] const CMatrix& occupied_range() const { return occupied_; }

    [[nodiscard]] CMatrix ezf_type_c(const CMatrix& g_hat, double rho) const;
    [[nodiscard]] CMatrix emrt_type_c(const CMatrix& g_hat, double p_d) const;
    [[nodiscard]] CVector ezf_type_s(const CMatrix& g_hat, std::size_t n, double rho) const;
    [[nodiscard]] CVector emrt_type_s(const CMatrix& g_hat, std::size_t n, double p_d) const;

    /// Precoders of `method` for estimated type-C channels `g_hat`. For ZF and MRT only
    /// w_c is filled (callers put every served user in g_hat).
    [[nodiscard]] PrecoderSet build(Method method, const CMatrix& g_hat, const PowerParams& power) const;

private:
    struct User {
        CMatrix phi;
        std::size_t target_rank = 0;
        CVector u_max;
        double lambda_max = 0.0;
        CMatrix factor;       // Phi = factor factor^H
        CMatrix others_basis; // eigenvectors of sum_{i != n} Phi_S,i with nonzero eigenvalues
        RVector others_values;
        CMatrix others_coords; // others_basis^H factor
    };

    [[nodiscard]] std::pair<CMatrix, std::size_t> project_off_interference(const CMatrix& g_hat,
                                                                           const User& u) const;
    // Orthonormal basis of range(G), checked to have rank K < M.
    [[nodiscard]] CMatrix channel_range(const CMatrix& g_hat) const;
    [[nodiscard]] CVector emrt_beam(const CMatrix& channel_range, std::size_t n, double p_d) const;
    // G projected off range(Phi_S), with the dimension checks of the type-C designs.
    [[nodiscard]] CMatrix project_off_occupied(const CMatrix& g_hat) const;

    std::size_t dim_;
    StatisticsOptions opts_;
    std::vector<User> users_;
    CMatrix occupied_;
};

/// Column k = sqrt(p_d) g_k / ||g_k||.
[[nodiscard]] CMatrix mrt_baseline(const CMatrix& g_hat, double p_d);

/// sqrt(rho) * pseudo_inverse(g_hat).
[[nodiscard]] CMatrix zf_baseline(const CMatrix& g_hat, double rho);

/// MRT for type-C users, sqrt(p_d) u_max(Phi_S,n) for type-S users.
[[nodiscard]] PrecoderSet sbm_precoders(const CMatrix& g_hat, std::span<const CMatrix> phi_s, double p_d);

/// Minimum-power precoder with G^H W = sqrt(rho) I and W^H Phi_S,n W = 0 for every n.
[[nodiscard]] CMatrix ezf_typeC(const CMatrix& g_hat, std::span<const CMatrix> phi_s, double rho,
                                double rank_tol = kRankTol);

/// Minimum-power precoder for type-S user n delivering received statistical power rho,
/// orthogonal to every estimated type-C channel and to the other type-S covariances.
[[nodiscard]] CVector ezf_typeS(const CMatrix& g_hat, std::span<const CMatrix> phi_s, std::size_t n, double rho,
                                double rank_tol = kRankTol);

/// MRT restricted to the null space of sum_n Phi_S,n, each column with power p_d.
[[nodiscard]] CMatrix emrt_typeC(const CMatrix& g_hat, std::span<const CMatrix> phi_s, double p_d,
                                 double rank_tol = kRankTol);

/// Power-p_d beam maximising w^H Phi w subject to w^H G = 0.
[[nodiscard]] CVector emrt_typeS(const CMatrix& g_hat, const CMatrix& phi_s_n, double p_d,
                                 double rank_tol = kRankTol);

} // namespace mixcsi
