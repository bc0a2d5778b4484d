// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The mixcsi authors

#include "mixcsi/channel.hpp"

#include "mixcsi/errors.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numbers>

namespace mixcsi {

void UserGeometry::validate() const {
    if (!(angle_spread > 0.0)) {
        throw ValidationError(fmt::format("angle spread must be positive, got {}", angle_spread));
    }
    if (num_paths < 1) {
        throw ValidationError("number of paths must be at least 1");
    }
    if (!(antenna_spacing_ratio > 0.0)) {
        throw ValidationError(fmt::format("antenna spacing ratio must be positive, got {}", antenna_spacing_ratio));
    }
    if (!std::isfinite(mean_aoa)) {
        throw ValidationError("mean AOA must be finite");
    }
}

void PilotConfig::validate() const {
    if (t_pilot < 1) {
        throw ValidationError("t_pilot must be at least 1 OFDM symbol");
    }
    if (!(p_u > 0.0) || !std::isfinite(p_u)) {
        throw ValidationError(fmt::format("pilot power must be positive and finite, got {}", p_u));
    }
}

CVector steering_vector(double theta, std::size_t m, double spacing_ratio, std::size_t num_paths) {
    if (m < 1 || num_paths < 1) {
        throw ValidationError("steering_vector: M and L must be at least 1");
    }
    const double amp = 1.0 / std::sqrt(static_cast<double>(num_paths));
    const double step = -2.0 * std::numbers::pi * spacing_ratio * std::cos(theta);
    CVector a(static_cast<Eigen::Index>(m));
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        a(i) = std::polar(amp, step * static_cast<double>(i));
    }
    return a;
}

CMatrix synth_covariance(const UserGeometry& geom, std::size_t m, Rng& rng) {
    geom.validate();
    if (m < 1) {
        throw ValidationError("synth_covariance: M must be at least 1");
    }
    std::uniform_real_distribution<double> aoa(geom.mean_aoa - geom.angle_spread / 2.0,
                                               geom.mean_aoa + geom.angle_spread / 2.0);
    CMatrix a(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(geom.num_paths));
    for (Eigen::Index l = 0; l < a.cols(); ++l) {
        a.col(l) = steering_vector(aoa(rng), m, geom.antenna_spacing_ratio, geom.num_paths);
    }
    return hermitian_part(a * a.adjoint());
}

CVector sample_channel(const CMatrix& phi, Rng& rng) {
    return psd_sqrt(phi) * complex_normal_vector(phi.rows(), rng);
}

MmseEstimator::MmseEstimator(const CMatrix& phi, const PilotConfig& pilot) {
    pilot.validate();
    require_hermitian(phi, "channel covariance");
    const double snr = pilot.training_snr();
    const auto m = phi.rows();
    const CMatrix reg = CMatrix::Identity(m, m) / snr + phi;
    // reg and phi commute, so reg^{-1} phi = phi reg^{-1}.
    filter_ = reg.ldlt().solve(phi);
    phi_hat_ = hermitian_part(filter_ * phi);
    delta_ = hermitian_part(phi - phi_hat_);
    noise_scale_ = 1.0 / std::sqrt(snr);
}

CVector MmseEstimator::estimate(const CVector& g, const CVector& noise) const {
    return filter_ * (g + noise * noise_scale_);
}

ChannelEstimate mmse_estimate(const CVector& g_true, const CMatrix& phi, const PilotConfig& pilot, Rng& rng) {
    if (g_true.size() != phi.rows()) {
        throw ValidationError(
            fmt::format("mmse_estimate: channel length {} does not match covariance size {}", g_true.size(),
                        phi.rows()));
    }
    const MmseEstimator est(phi, pilot);
    const CVector noise = complex_normal_vector(phi.rows(), rng);
    return {est.estimate(g_true, noise), est.phi_hat(), est.delta()};
}

double rank_bound(double theta_min, double theta_max, double spacing_ratio, std::size_t m) {
    if (theta_min > theta_max) {
        throw ValidationError(fmt::format("rank_bound: inverted AOA interval [{}, {}]", theta_min, theta_max));
    }
    return (std::cos(theta_min) - std::cos(theta_max)) * spacing_ratio * static_cast<double>(m);
}

} // namespace mixcsi
