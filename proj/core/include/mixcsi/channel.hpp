// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The mixcsi authors

#pragma once

#include "mixcsi/linalg.hpp"
#include "mixcsi/random.hpp"

#include <cstddef>

namespace mixcsi {

// Finite-scatterer geometry of one single-antenna user seen from a uniform linear array.
struct UserGeometry {
    double mean_aoa = 0.0;               // radians
    double angle_spread = 0.0;           // radians, full width of the AOA interval
    std::size_t num_paths = 20;          // L
    double antenna_spacing_ratio = 0.5;  // d / lambda

    void validate() const;
    bool operator==(const UserGeometry&) const = default;
};

// Uplink pilot configuration. tau = 14 * t_pilot (14 subcarriers share one channel response).
struct PilotConfig {
    static constexpr std::size_t kSymbolsPerPilot = 14;

    std::size_t t_pilot = 1;
    double p_u = 10.0; // linear

    [[nodiscard]] std::size_t tau() const { return kSymbolsPerPilot * t_pilot; }
    /// tau * p_u, the effective pilot SNR.
    [[nodiscard]] double training_snr() const { return static_cast<double>(tau()) * p_u; }
    void validate() const;
    bool operator==(const PilotConfig&) const = default;
};

// MMSE estimate of one type-C channel. phi_hat + delta equals the true covariance.
struct ChannelEstimate {
    CVector g_hat;
    CMatrix phi_hat;
    CMatrix delta;
};

/// ULA steering vector with 1/sqrt(L) scaling; entry m is exp(-j 2 pi spacing m cos(theta)) / sqrt(L).
[[nodiscard]] CVector steering_vector(double theta, std::size_t m, double spacing_ratio, std::size_t num_paths);

/// Draws L path angles uniformly over [mean - spread/2, mean + spread/2] and returns A A^H.
[[nodiscard]] CMatrix synth_covariance(const UserGeometry& geom, std::size_t m, Rng& rng);

/// psd_sqrt(phi) * h with h ~ CN(0, I).
[[nodiscard]] CVector sample_channel(const CMatrix& phi, Rng& rng);

/// MMSE filter Phi (I/(tau p_u) + Phi)^{-1} and the covariances it induces.
/// Built once per covariance; applying it to a noisy observation is a single matvec.
class MmseEstimator {
public:
    MmseEstimator(const CMatrix& phi, const PilotConfig& pilot);

    [[nodiscard]] const CMatrix& filter() const { return filter_; }
    [[nodiscard]] const CMatrix& phi_hat() const { return phi_hat_; }
    [[nodiscard]] const CMatrix& delta() const { return delta_; }

    /// Estimate from g and a unit-variance noise draw n: filter * (g + n / sqrt(tau p_u)).
    [[nodiscard]] CVector estimate(const CVector& g, const CVector& noise) const;

private:
    CMatrix filter_;
    CMatrix phi_hat_;
    CMatrix delta_;
    double noise_scale_;
};

[[nodiscard]] ChannelEstimate mmse_estimate(const CVector& g_true, const CMatrix& phi, const PilotConfig& pilot,
                                            Rng& rng);

/// Asymptotic rank bound (cos(theta_min) - cos(theta_max)) * spacing * M.
[[nodiscard]] double rank_bound(double theta_min, double theta_max, double spacing_ratio, std::size_t m);

} // namespace mixcsi
