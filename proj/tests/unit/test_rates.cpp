// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The mixcsi authors

#include "mixcsi/channel.hpp"
#include "mixcsi/errors.hpp"
#include "mixcsi/rates.hpp"
#include "mixcsi/scenario.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace mixcsi;
using mixcsi::test::random_matrix;

namespace {

PrecoderSet make_set(CMatrix w_c, CMatrix w_s) {
    PrecoderSet p;
    p.w_c = std::move(w_c);
    p.w_s = std::move(w_s);
    return p;
}

Scenario iid_scenario(std::size_t m, std::size_t k, std::size_t n, double p_d) {
    ScenarioParams params;
    params.m = m;
    params.k = k;
    params.n = n;
    params.p_d_db = 10.0 * std::log10(p_d);
    params.trials = 2000;
    params.seed = 5;
    return make_scenario(params);
}

Realization identity_realization(const Scenario& s) {
    const auto m = static_cast<Eigen::Index>(s.m);
    return {std::vector<CMatrix>(s.k, CMatrix::Identity(m, m)), std::vector<CMatrix>(s.n, CMatrix::Identity(m, m))};
}

} // namespace

TEST_SUITE("rates") {

TEST_CASE("sinr_typeC and sinr_typeS") {
    SUBCASE("single user with unit gain over unit noise") {
        CVector g = CVector::Zero(3);
        g(0) = 1.0;
        CMatrix w = CMatrix::Zero(3, 1);
        w(0, 0) = 1.0;
        const PrecoderSet p = make_set(w, CMatrix(3, 0));
        CHECK(sinr_typeC(g, p, 0) == doctest::Approx(1.0));
        CHECK(std::log2(1.0 + sinr_typeC(g, p, 0)) == doctest::Approx(1.0));
        const PrecoderSet q = make_set(CMatrix(3, 0), w);
        CHECK(sinr_typeS(g, q, 0) == doctest::Approx(1.0));
    }
    SUBCASE("zero precoder") {
        Rng rng(1);
        const CVector g = complex_normal_vector(4, rng);
        const PrecoderSet p = make_set(CMatrix::Zero(4, 2), random_matrix(4, 1, rng));
        CHECK(sinr_typeC(g, p, 0) == 0.0);
        const PrecoderSet q = make_set(random_matrix(4, 2, rng), CMatrix::Zero(4, 1));
        CHECK(sinr_typeS(g, q, 0) == 0.0);
    }
    SUBCASE("term-by-term recomputation and energy bookkeeping") {
        Rng rng(2);
        const CVector g = complex_normal_vector(16, rng);
        const PrecoderSet p = make_set(random_matrix(16, 4, rng), random_matrix(16, 2, rng));
        const CVector gw_c = p.w_c.adjoint() * g;
        const CVector gw_s = p.w_s.adjoint() * g;
        const double total = gw_c.squaredNorm() + gw_s.squaredNorm();
        for (std::size_t k = 0; k < 4; ++k) {
            const double signal = std::norm(gw_c(static_cast<Eigen::Index>(k)));
            const double expected = signal / (total - signal + 1.0);
            const double sinr = sinr_typeC(g, p, k);
            CHECK(std::abs(sinr - expected) < 1e-12 * expected);
            // signal + interference recomputes the full received energy
            CHECK(std::abs(signal + (signal / sinr - 1.0) - total) < 1e-12 * total);
        }
        for (std::size_t n = 0; n < 2; ++n) {
            const double signal = std::norm(gw_s(static_cast<Eigen::Index>(n)));
            const double expected = signal / (total - signal + 1.0);
            CHECK(std::abs(sinr_typeS(g, p, n) - expected) < 1e-12 * expected);
        }
    }
    SUBCASE("invariant under a common unitary rotation") {
        Rng rng(3);
        const CMatrix q = orthonormal_range(random_matrix(12, 12, rng));
        const CVector g = complex_normal_vector(12, rng);
        const PrecoderSet p = make_set(random_matrix(12, 3, rng), random_matrix(12, 2, rng));
        const PrecoderSet pr = make_set(q * p.w_c, q * p.w_s);
        const CVector gr = q * g;
        for (std::size_t k = 0; k < 3; ++k) {
            CHECK(std::abs(sinr_typeC(gr, pr, k) - sinr_typeC(g, p, k)) < 1e-10);
        }
        for (std::size_t n = 0; n < 2; ++n) {
            CHECK(std::abs(sinr_typeS(gr, pr, n) - sinr_typeS(g, p, n)) < 1e-10);
        }
    }
}

TEST_CASE("i.i.d. closed forms") {
    SUBCASE("type-C reference value") {
        // log2(1 + 14001 / 719.1)
        CHECK(iid_rate_typeC(100, 5, 1, 14.0, 10.0, 10.0) == doctest::Approx(4.355451252345555).epsilon(1e-12));
    }
    SUBCASE("type-S reference value") {
        // log2(1 + 1 / 9.1)
        CHECK(iid_rate_typeS(5, 5, 10.0) == doctest::Approx(0.15041684255309853).epsilon(1e-12));
        CHECK(iid_rate_typeS(5, 5, 0.0) == 0.0);
    }
    SUBCASE("single type-C user is monotone in p_d") {
        double previous = 0.0;
        for (double p_d : {0.01, 0.1, 1.0, 10.0, 100.0, 1e4, 1e6}) {
            const double r = iid_rate_typeC(64, 1, 0, 14.0, 10.0, p_d);
            CHECK(r > previous);
            previous = r;
        }
    }
}

TEST_CASE("closed forms collapse to the i.i.d. forms for identity covariances") {
    for (FourthMoment fm : {FourthMoment::WithDiagonalCorrection, FourthMoment::Circular}) {
        for (bool mixed : {false, true}) {
            const ClosedFormOptions opts{fm, mixed};
            const std::size_t m = 24, k = 3, n = 2;
            const double tau = 14.0, p_u = 2.0, p_d = 5.0;
            const double c = tau * p_u / (tau * p_u + 1.0);
            const auto mi = static_cast<Eigen::Index>(m);
            const std::vector<CMatrix> phi_c(k, CMatrix::Identity(mi, mi));
            const std::vector<CMatrix> phi_hat(k, c * CMatrix::Identity(mi, mi));
            const std::vector<CMatrix> delta(k, (1.0 - c) * CMatrix::Identity(mi, mi));
            const std::vector<CMatrix> phi_s(n, CMatrix::Identity(mi, mi));
            for (std::size_t i = 0; i < k; ++i) {
                CHECK(std::abs(closed_form_rate_typeC(i, phi_c, phi_hat, delta, phi_s, p_d, opts) -
                               iid_rate_typeC(m, k, n, tau, p_u, p_d)) < 1e-9);
            }
            for (std::size_t j = 0; j < n; ++j) {
                CHECK(std::abs(closed_form_rate_typeS(j, phi_s, phi_hat, p_d, opts) - iid_rate_typeS(k, n, p_d)) <
                      1e-9);
            }
        }
    }
}

TEST_CASE("type-S closed form with non-overlapping type-S users") {
    // steering vectors whose cosines differ by 2/M are orthogonal
    const std::size_t m = 32;
    const CVector a1 = steering_vector(std::acos(0.0), m, 0.5, 1);
    const CVector a2 = steering_vector(std::acos(2.0 / m * 3.0), m, 0.5, 1);
    REQUIRE(std::abs(a1.dot(a2)) < 1e-10);
    const CMatrix phi1 = a1 * a1.adjoint();
    const CMatrix phi2 = a2 * a2.adjoint();
    Rng rng(4);
    const std::vector<CMatrix> phi_hat{test::random_psd(32, 6, rng)};
    const std::vector<CMatrix> both{phi1, phi2};
    const std::vector<CMatrix> alone{phi1};
    CHECK(std::abs(closed_form_rate_typeS(0, both, phi_hat, 10.0) - closed_form_rate_typeS(0, alone, phi_hat, 10.0)) <
          1e-12);
}

TEST_CASE("sum rate and spectral efficiency") {
    CHECK(sum_rate({}, {}) == 0.0);
    const std::vector<double> one{1.0};
    CHECK(sum_rate(one, one) == 2.0);
    const std::vector<double> c{0.5, 1.25, 2.0};
    const std::vector<double> s{0.75};
    CHECK(sum_rate(c, s) == doctest::Approx(4.5));
    CHECK(spectral_efficiency(7.0, 1) == doctest::Approx(5.0));
    CHECK(spectral_efficiency(7.0, 0) == doctest::Approx(6.0));
    CHECK(spectral_efficiency(1.0, 1) == doctest::Approx(5.0 / 7.0));
    CHECK_THROWS_AS((void)spectral_efficiency(1.0, 6), ValidationError);
}

TEST_CASE("pilot accounting") {
    ScenarioParams params;
    params.k = 5;
    params.n = 20;
    const Scenario s = make_scenario(params);
    CHECK(pilot_symbols(s, Method::SBM, ConventionalMode::AllUsers) == 1);
    CHECK(pilot_symbols(s, Method::eZF, ConventionalMode::AllUsers) == 1);
    // 25 users need two pilot symbols of 14 subcarriers
    CHECK(pilot_symbols(s, Method::ZF, ConventionalMode::AllUsers) == 2);
    CHECK(pilot_symbols(s, Method::MRT, ConventionalMode::TypeCOnly) == 1);
}

TEST_CASE("Monte Carlo engine") {
    SUBCASE("single white type-C user with MRT approaches the hardened rate") {
        const Scenario s = iid_scenario(100, 1, 0, 10.0);
        const RateReport rep = ergodic_rates_mc(s, identity_realization(s), Method::MRT, {4000, 1});
        const double tp = s.pilot.training_snr();
        const double oracle = std::log2(1.0 + s.p_d * (tp * 100.0 + 1.0) / (tp + 1.0));
        MESSAGE("MC " << rep.per_user_c[0] << " +/- " << rep.per_user_c_se[0] << ", oracle " << oracle);
        CHECK(std::abs(rep.per_user_c[0] - oracle) < 0.05);
    }
    SUBCASE("equal seeds and trial counts give identical reports for any job count") {
        ScenarioParams params;
        params.m = 32;
        params.k = 3;
        params.n = 2;
        params.trials = 300;
        params.varsigma_deg = 60.0;
        const Scenario s = make_scenario(params);
        const Realization r = realize(s);
        for (Method m : {Method::SBM, Method::eMRT, Method::MRT}) {
            const RateReport a = ergodic_rates_mc(s, r, m, {0, 1});
            const RateReport b = ergodic_rates_mc(s, r, m, {0, 1});
            const RateReport c = ergodic_rates_mc(s, r, m, {0, 4});
            CHECK(a.per_user_c == b.per_user_c);
            CHECK(a.per_user_s == b.per_user_s);
            CHECK(a.per_user_c == c.per_user_c);
            CHECK(a.per_user_s == c.per_user_s);
            CHECK(a.per_user_c_se == c.per_user_c_se);
            CHECK(a.trials == 300);
        }
    }
    SUBCASE("rates vanish monotonically as p_d goes to 0") {
        ScenarioParams params;
        params.m = 32;
        params.k = 2;
        params.n = 2;
        params.trials = 200;
        std::vector<double> last_c(2, 1e300), last_s(2, 1e300);
        for (double p_d_db : {10.0, 0.0, -20.0, -40.0, -80.0}) {
            params.p_d_db = p_d_db;
            const Scenario s = make_scenario(params);
            const RateReport rep = ergodic_rates_mc(s, realize(s), Method::SBM);
            for (std::size_t i = 0; i < 2; ++i) {
                CHECK(rep.per_user_c[i] < last_c[i]);
                CHECK(rep.per_user_s[i] < last_s[i]);
                CHECK(rep.per_user_c[i] >= 0.0);
                last_c[i] = rep.per_user_c[i];
                last_s[i] = rep.per_user_s[i];
            }
        }
        CHECK(last_c[0] < 1e-4);
        CHECK(last_s[0] < 1e-4);
    }
    SUBCASE("report bookkeeping") {
        ScenarioParams params;
        params.m = 48;
        params.k = 3;
        params.n = 2;
        params.trials = 100;
        const Scenario s = make_scenario(params);
        for (Method m : {Method::ZF, Method::MRT, Method::SBM, Method::eZF, Method::eMRT}) {
            const RateReport rep = ergodic_rates_mc(s, m);
            CHECK(rep.method == m);
            CHECK(rep.source == RateSource::MonteCarlo);
            CHECK(rep.per_user_c.size() == 3);
            CHECK(rep.per_user_s.size() == 2);
            double total = 0.0;
            for (double x : rep.per_user_c) {
                CHECK(x >= 0.0);
                total += x;
            }
            for (double x : rep.per_user_s) {
                CHECK(x >= 0.0);
                total += x;
            }
            CHECK(rep.sum_rate == doctest::Approx(total));
            CHECK(rep.avg_c == doctest::Approx((rep.per_user_c[0] + rep.per_user_c[1] + rep.per_user_c[2]) / 3.0));
            CHECK(rep.spectral_efficiency == doctest::Approx(rep.sum_rate * (6.0 - rep.t_pilot) / 7.0));
        }
    }
    SUBCASE("type-C-only conventional baselines leave type-S users unserved") {
        ScenarioParams params;
        params.m = 32;
        params.k = 3;
        params.n = 2;
        params.trials = 100;
        const Scenario s = make_scenario(params);
        McOptions opts;
        opts.conventional = ConventionalMode::TypeCOnly;
        const RateReport rep = ergodic_rates_mc(s, Method::ZF, opts);
        CHECK(rep.per_user_s.empty());
        CHECK(rep.sum_rate == doctest::Approx(rep.per_user_c[0] + rep.per_user_c[1] + rep.per_user_c[2]));
    }
    SUBCASE("infeasible eZF surfaces as an error") {
        ScenarioParams params;
        params.m = 8;
        params.k = 6;
        params.n = 1;
        params.trials = 10;
        params.angle_spread_deg = 120.0;
        const Scenario s = make_scenario(params);
        McOptions opts;
        opts.energy_fraction = 1.0;
        CHECK_THROWS_AS((void)ergodic_rates_mc(s, Method::eZF, opts), InfeasibleError);
    }
}

TEST_CASE("closed-form reports") {
    ScenarioParams params;
    params.m = 16;
    params.k = 2;
    params.n = 1;
    const Scenario s = make_scenario(params);
    const RateReport rep = closed_form_report(s, realize(s));
    CHECK(rep.source == RateSource::ClosedForm);
    CHECK(rep.method == Method::SBM);
    CHECK(rep.per_user_c.size() == 2);
    CHECK(std::isnan(rep.per_user_c_se[0]));
    const RateReport iid = iid_closed_form_report(s);
    CHECK(iid.per_user_c[0] ==
          doctest::Approx(iid_rate_typeC(16, 2, 1, static_cast<double>(s.pilot.tau()), s.pilot.p_u, s.p_d)));
    CHECK(iid.sum_rate == doctest::Approx(2 * iid.per_user_c[0] + iid.per_user_s[0]));
}

} // TEST_SUITE
