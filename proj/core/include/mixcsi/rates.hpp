// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The mixcsi authors

#pragma once

#include "mixcsi/linalg.hpp"
#include "mixcsi/precoding.hpp"
#include "mixcsi/scenario.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace mixcsi {

enum class RateSource { MonteCarlo, ClosedForm, IIDClosedForm };
[[nodiscard]] std::string_view to_string(RateSource s);
[[nodiscard]] std::optional<RateSource> parse_source(std::string_view s);

// Which users the ZF and MRT baselines serve.
enum class ConventionalMode {
    AllUsers,  // all K + N users are estimated from pilots and precoded
    TypeCOnly, // only the K type-C users are served
};
[[nodiscard]] std::string_view to_string(ConventionalMode m);
[[nodiscard]] std::optional<ConventionalMode> parse_conventional(std::string_view s);

struct RateReport {
    std::vector<double> per_user_c; // bits/s/Hz
    std::vector<double> per_user_s;
    std::vector<double> per_user_c_se; // MC standard errors (NaN for closed forms)
    std::vector<double> per_user_s_se;
    double avg_c = 0.0;
    double avg_s = 0.0;
    double avg_c_se = 0.0;
    double avg_s_se = 0.0;
    double sum_rate = 0.0;
    double sum_rate_se = 0.0;
    double spectral_efficiency = 0.0;
    std::size_t t_pilot = 1; // pilot symbols charged in the spectral efficiency
    std::size_t trials = 0;
    Method method = Method::SBM;
    RateSource source = RateSource::MonteCarlo;
};

/// |g^H w_k|^2 / (sum_{i != k} |g^H w_i|^2 + sum_n |g^H w_S,n|^2 + 1), columns of p.w_c.
[[nodiscard]] double sinr_typeC(const CVector& g, const PrecoderSet& p, std::size_t k);
/// Same with the roles of w_c and w_s swapped.
[[nodiscard]] double sinr_typeS(const CVector& g, const PrecoderSet& p, std::size_t n);

struct ClosedFormOptions {
    FourthMoment fourth_moment = FourthMoment::WithDiagonalCorrection;
    // The type-C interference term F(A^{1/2} Phi_k A^{1/2}, A) uses A = Phi_hat_i on both sides.
    // Setting this evaluates the left factor with Phi_hat_k^{1/2} instead, i.e.
    // F(Phi_hat_k^{1/2} Phi_k Phi_hat_i^{1/2}, Phi_hat_i), keeping the real part.
    bool mixed_cross_term = false;
};

/// Approximate ergodic rate of type-C user k under SBM (MRT for type-C, top eigenvector for type-S).
[[nodiscard]] double closed_form_rate_typeC(std::size_t k, std::span<const CMatrix> phi_c,
                                            std::span<const CMatrix> phi_hat, std::span<const CMatrix> delta,
                                            std::span<const CMatrix> phi_s, double p_d,
                                            const ClosedFormOptions& opts = {});

/// Approximate ergodic rate of type-S user n under SBM.
[[nodiscard]] double closed_form_rate_typeS(std::size_t n, std::span<const CMatrix> phi_s,
                                            std::span<const CMatrix> phi_hat, double p_d,
                                            const ClosedFormOptions& opts = {});

/// Type-C closed form with Phi = I: log2(1 + (tau p_u M + 1) / ((tau p_u + 1)(K - 1 + N + 1/p_d))).
[[nodiscard]] double iid_rate_typeC(std::size_t m, std::size_t k, std::size_t n, double tau, double p_u,
                                    double p_d);
/// Type-S closed form with Phi = I: log2(1 + 1 / (N - 1 + K + 1/p_d)).
[[nodiscard]] double iid_rate_typeS(std::size_t k, std::size_t n, double p_d);

[[nodiscard]] double sum_rate(std::span<const double> rates_c, std::span<const double> rates_s);

/// sum_rate * (6 - t_pilot) / 7. t_pilot >= 6 leaves no data symbols and is rejected.
[[nodiscard]] double spectral_efficiency(double sum_rate, std::size_t t_pilot);

/// Pilot symbols a method needs: t_pilot for the mixed-CSI methods, enough for every
/// estimated user for the conventional ones.
[[nodiscard]] std::size_t pilot_symbols(const Scenario& s, Method method, ConventionalMode conventional);

struct McOptions {
    std::size_t trials = 0; // 0: use the scenario's trial count
    std::size_t jobs = 1;
    ConventionalMode conventional = ConventionalMode::AllUsers;
    // Low-rank approximation of type-S covariances before eZF and eMRT (1.0 disables it).
    double energy_fraction = 0.999;
    double rank_tol = kRankTol;
};

/// Monte Carlo ergodic rates. Covariances are fixed; each trial draws fresh fading and
/// pilot noise from its own generator, so results do not depend on `jobs`.
[[nodiscard]] RateReport ergodic_rates_mc(const Scenario& s, const Realization& r, Method method,
                                          const McOptions& opts = {});
[[nodiscard]] RateReport ergodic_rates_mc(const Scenario& s, Method method, const McOptions& opts = {});

/// SBM closed forms for every user of the scenario.
[[nodiscard]] RateReport closed_form_report(const Scenario& s, const Realization& r,
                                            const ClosedFormOptions& opts = {});
/// i.i.d. closed forms (covariances ignored).
[[nodiscard]] RateReport iid_closed_form_report(const Scenario& s);

} // namespace mixcsi
