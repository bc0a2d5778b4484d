// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The mixcsi authors

#include "mixcsi/channel.hpp"
#include "mixcsi/errors.hpp"
#include "mixcsi/scenario.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace mixcsi;
using mixcsi::test::max_abs;

namespace {

constexpr double kPi = std::numbers::pi;

CMatrix empirical_covariance(const std::vector<CVector>& xs) {
    CMatrix c = CMatrix::Zero(xs.front().size(), xs.front().size());
    for (const CVector& x : xs) {
        c.noalias() += x * x.adjoint();
    }
    return c / static_cast<double>(xs.size());
}

} // namespace

TEST_SUITE("channel") {

TEST_CASE("steering_vector") {
    SUBCASE("broadside") {
        const CVector a = steering_vector(kPi / 2, 4, 0.5, 1);
        CHECK(max_abs(a - CVector::Ones(4)) < 1e-15);
    }
    SUBCASE("endfire alternates sign") {
        const CVector a = steering_vector(0.0, 2, 0.5, 1);
        CHECK(std::abs(a(0) - cd(1.0)) < 1e-15);
        CHECK(std::abs(a(1) - cd(-1.0)) < 1e-15);
    }
    SUBCASE("squared norm is M / L") {
        for (std::size_t m : {1u, 7u, 64u, 200u}) {
            for (std::size_t l : {1u, 3u, 20u}) {
                const CVector a = steering_vector(0.37 * static_cast<double>(m), m, 0.5, l);
                double direct = 0.0;
                for (Eigen::Index i = 0; i < a.size(); ++i) {
                    direct += std::norm(a(i));
                }
                CHECK(std::abs(direct - static_cast<double>(m) / static_cast<double>(l)) < 1e-12);
            }
        }
    }
    SUBCASE("invalid sizes") {
        CHECK_THROWS_AS((void)steering_vector(0.0, 0, 0.5, 1), ValidationError);
        CHECK_THROWS_AS((void)steering_vector(0.0, 4, 0.5, 0), ValidationError);
    }
}

TEST_CASE("synth_covariance") {
    SUBCASE("single path is rank one with lambda_max = M") {
        Rng rng(1);
        const CMatrix phi = synth_covariance({1.0, deg_to_rad(10.0), 1, 0.5}, 32, rng);
        const EigenDecomposition eig = hermitian_eig(phi);
        CHECK(numerical_rank(eig) == 1);
        CHECK(eig.max_value() == doctest::Approx(32.0).epsilon(1e-12));
        CHECK(std::abs(phi.trace() - cd(32.0)) < 1e-9);
    }
    SUBCASE("L = 20, 10 degree spread, M = 100: trace M and rank <= L") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            Rng rng(seed);
            const CMatrix phi = synth_covariance({1.3, deg_to_rad(10.0), 20, 0.5}, 100, rng);
            CHECK(std::abs(phi.trace() - cd(100.0)) < 1e-9);
            const EigenDecomposition eig = hermitian_eig(phi);
            CHECK(numerical_rank(eig) <= 20);
            CHECK(relative_asymmetry(phi) < 1e-12);
            CHECK(eig.values.minCoeff() >= -1e-10 * eig.max_value());
        }
    }
    SUBCASE("equal seeds give bit-identical matrices") {
        const UserGeometry g{0.8, deg_to_rad(10.0), 20, 0.5};
        Rng r1(42), r2(42);
        CHECK(synth_covariance(g, 64, r1) == synth_covariance(g, 64, r2));
    }
    SUBCASE("invalid geometry") {
        Rng rng(0);
        CHECK_THROWS_AS((void)synth_covariance({0.0, 0.0, 20, 0.5}, 8, rng), ValidationError);
        CHECK_THROWS_AS((void)synth_covariance({0.0, 0.1, 0, 0.5}, 8, rng), ValidationError);
        CHECK_THROWS_AS((void)synth_covariance({0.0, 0.1, 20, 0.0}, 8, rng), ValidationError);
    }
}

// At the 1e-9 rank threshold the prolate eigenvalue tail past the asymptotic bound
// survives, so the zero-slack form is expected to fail here. Kept as a may_fail record.
TEST_CASE("numerical rank within the asymptotic rank bound at M >= 200" * doctest::may_fail()) {
    for (std::size_t m : {200u, 256u}) {
        for (double mean_deg : {30.0, 60.0, 90.0, 120.0}) {
            Rng rng(static_cast<std::uint64_t>(m) * 1000 + static_cast<std::uint64_t>(mean_deg));
            const double mean = deg_to_rad(mean_deg);
            const double spread = deg_to_rad(10.0);
            const CMatrix phi = synth_covariance({mean, spread, 20, 0.5}, m, rng);
            const std::size_t rank = numerical_rank(hermitian_eig(phi));
            const double bound = rank_bound(mean - spread / 2, mean + spread / 2, 0.5, m);
            MESSAGE("M = " << m << ", mean AOA " << mean_deg << " deg: rank " << rank << ", bound " << bound);
            CHECK(rank <= 20);
            CHECK(rank <= static_cast<std::size_t>(std::ceil(bound)));
        }
    }
}

TEST_CASE("sample_channel") {
    SUBCASE("zero covariance gives the zero vector") {
        Rng rng(3);
        for (int i = 0; i < 10; ++i) {
            CHECK(sample_channel(CMatrix::Zero(5, 5), rng).norm() == 0.0);
        }
    }
    SUBCASE("white covariance: unit per-entry variance") {
        Rng rng(4);
        const int draws = 100000;
        double acc = 0.0;
        const CMatrix eye = CMatrix::Identity(4, 4);
        for (int i = 0; i < draws; ++i) {
            acc += sample_channel(eye, rng).squaredNorm();
        }
        const double per_entry = acc / draws / 4.0;
        CHECK(std::abs(per_entry - 1.0) < 0.01);
    }
    SUBCASE("rank-one covariance: draws are parallel to u") {
        Rng rng(5);
        const CVector u = steering_vector(0.4, 16, 0.5, 1) / 4.0;
        const CMatrix phi = 16.0 * u * u.adjoint();
        for (int i = 0; i < 50; ++i) {
            const CVector g = sample_channel(phi, rng);
            const double cos2 = std::norm(u.dot(g)) / g.squaredNorm();
            CHECK(cos2 == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
    SUBCASE("empirical covariance over 1e5 draws") {
        Rng rng(6);
        const CMatrix phi = synth_covariance({1.1, deg_to_rad(20.0), 20, 0.5}, 12, rng);
        std::vector<CVector> xs;
        for (int i = 0; i < 100000; ++i) {
            xs.push_back(sample_channel(phi, rng));
        }
        CHECK(rel_frobenius_error(empirical_covariance(xs), phi) < 0.05);
    }
}

TEST_CASE("MMSE estimation") {
    SUBCASE("white channel with tau p_u = 140") {
        const PilotConfig pilot{1, 10.0};
        REQUIRE(pilot.tau() == 14);
        const MmseEstimator est(CMatrix::Identity(6, 6), pilot);
        CHECK(max_abs(est.phi_hat() - CMatrix::Identity(6, 6) * (140.0 / 141.0)) < 1e-14);
        CHECK(max_abs(est.delta() - CMatrix::Identity(6, 6) * (1.0 / 141.0)) < 1e-14);
    }
    SUBCASE("near-perfect pilots") {
        Rng rng(8);
        const CMatrix phi = synth_covariance({0.9, deg_to_rad(10.0), 20, 0.5}, 32, rng);
        const PilotConfig pilot{1, 1e9 / 14.0};
        int good = 0;
        for (int i = 0; i < 100; ++i) {
            const CVector g = sample_channel(phi, rng);
            const ChannelEstimate e = mmse_estimate(g, phi, pilot, rng);
            good += (e.g_hat - g).norm() / g.norm() < 1e-3;
        }
        CHECK(good >= 99);
    }
    SUBCASE("decomposition, PSD, and empirical statistics") {
        Rng rng(9);
        const CMatrix phi = synth_covariance({2.0, deg_to_rad(25.0), 20, 0.5}, 10, rng);
        const PilotConfig pilot{1, 0.1};
        const MmseEstimator est(phi, pilot);
        CHECK(rel_frobenius_error(est.phi_hat() + est.delta(), phi) < 1e-10);
        CHECK(hermitian_eig(est.phi_hat()).values.minCoeff() >= -1e-10 * hermitian_eig(phi).max_value());
        CHECK(hermitian_eig(est.delta()).values.minCoeff() >= -1e-10 * hermitian_eig(phi).max_value());

        std::vector<CVector> g_hat;
        CMatrix cross = CMatrix::Zero(10, 10);
        const int draws = 100000;
        for (int i = 0; i < draws; ++i) {
            const CVector g = sample_channel(phi, rng);
            const CVector gh = est.estimate(g, complex_normal_vector(10, rng));
            cross.noalias() += gh * (g - gh).adjoint();
            g_hat.push_back(gh);
        }
        cross /= static_cast<double>(draws);
        CHECK(rel_frobenius_error(empirical_covariance(g_hat), est.phi_hat()) < 0.05);
        // estimate and error are uncorrelated
        CHECK(cross.norm() < 0.05 * est.phi_hat().norm());
    }
    SUBCASE("non-positive pilot power is rejected") {
        CHECK_THROWS_AS(MmseEstimator(CMatrix::Identity(2, 2), PilotConfig{1, 0.0}), ValidationError);
        CHECK_THROWS_AS(MmseEstimator(CMatrix::Identity(2, 2), PilotConfig{0, 1.0}), ValidationError);
    }
}

TEST_CASE("rank_bound") {
    CHECK(rank_bound(1.0, 1.0, 0.5, 100) == 0.0);
    // independent evaluation: (cos 85 deg - cos 95 deg) * 0.5 * 100 = 2 sin(5 deg) * 50
    CHECK(rank_bound(deg_to_rad(85.0), deg_to_rad(95.0), 0.5, 100) == doctest::Approx(8.715574274765817));
    CHECK(rank_bound(0.0, kPi, 0.5, 64) == doctest::Approx(64.0));
    CHECK_THROWS_AS((void)rank_bound(1.0, 0.5, 0.5, 10), ValidationError);
}

} // TEST_SUITE
