// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The mixcsi authors

#include "mixcsi/rates.hpp"

#include "mixcsi/errors.hpp"
#include "mixcsi/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace mixcsi {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double trace_product(const CMatrix& a, const CMatrix& b) {
    return a.cwiseProduct(b.transpose()).sum().real();
}

double sinr_from_row(const Eigen::Ref<const RVector>& row, Eigen::Index own) {
    const double signal = row(own);
    const double interference = row.sum() - signal;
    return signal / (interference + 1.0);
}

// Channel and MMSE estimate of one user in its covariance eigenbasis:
//   g     = basis * (sqrt(lambda) .* h)
//   g_hat = basis * (shrink .* (sqrt(lambda) .* h + z / sqrt(tau p_u)))
// with h, z ~ CN(0, I_r). Eigenvalues below rank_tol * lambda_max are dropped.
struct UserSampler {
    CMatrix basis;
    RVector root;
    RVector shrink;
    double noise_scale = 0.0;

    UserSampler(const CMatrix& phi, double training_snr, double rank_tol) {
        const EigenDecomposition eig = hermitian_eig(phi);
        const auto r = static_cast<Eigen::Index>(std::max<std::size_t>(numerical_rank(eig, rank_tol), 1));
        basis = eig.vectors.leftCols(r);
        const RVector lambda = eig.values.head(r).cwiseMax(0.0);
        root = lambda.cwiseSqrt();
        if (training_snr > 0.0) {
            shrink = lambda.array() / (lambda.array() + 1.0 / training_snr);
            noise_scale = 1.0 / std::sqrt(training_snr);
        } else {
            shrink = RVector::Zero(r);
        }
    }

    [[nodiscard]] Eigen::Index rank() const { return basis.cols(); }
};

struct TrialDraw {
    CMatrix g_c, g_s;
    CMatrix g_hat_c, g_hat_s;
};

void require_index(std::size_t i, std::size_t size, const char* what) {
    if (i >= size) {
        throw ValidationError(fmt::format("{} index {} out of range (size {})", what, i, size));
    }
}

struct MeanSe {
    double mean = 0.0;
    double se = kNaN;
};

MeanSe mean_and_se(const std::vector<double>& x) {
    MeanSe out;
    if (x.empty()) {
        return out;
    }
    double sum = 0.0;
    for (double v : x) {
        sum += v;
    }
    out.mean = sum / static_cast<double>(x.size());
    if (x.size() > 1) {
        double ss = 0.0;
        for (double v : x) {
            ss += (v - out.mean) * (v - out.mean);
        }
        out.se = std::sqrt(ss / static_cast<double>(x.size() - 1) / static_cast<double>(x.size()));
    }
    return out;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) {
        return 0.0;
    }
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return s / static_cast<double>(v.size());
}

} // namespace

std::string_view to_string(RateSource s) {
    switch (s) {
    case RateSource::MonteCarlo:
        return "MC";
    case RateSource::ClosedForm:
        return "ClosedForm";
    case RateSource::IIDClosedForm:
        return "IIDClosedForm";
    }
    return "?";
}

std::optional<RateSource> parse_source(std::string_view s) {
    for (RateSource r : {RateSource::MonteCarlo, RateSource::ClosedForm, RateSource::IIDClosedForm}) {
        if (s == to_string(r)) {
            return r;
        }
    }
    return std::nullopt;
}

std::string_view to_string(ConventionalMode m) {
    return m == ConventionalMode::AllUsers ? "all" : "type_c_only";
}

std::optional<ConventionalMode> parse_conventional(std::string_view s) {
    for (ConventionalMode m : {ConventionalMode::AllUsers, ConventionalMode::TypeCOnly}) {
        if (s == to_string(m)) {
            return m;
        }
    }
    return std::nullopt;
}

double sinr_typeC(const CVector& g, const PrecoderSet& p, std::size_t k) {
    require_index(k, static_cast<std::size_t>(p.w_c.cols()), "type-C user");
    const RVector c = (g.adjoint() * p.w_c).cwiseAbs2().transpose();
    const RVector s = (g.adjoint() * p.w_s).cwiseAbs2().transpose();
    const auto kk = static_cast<Eigen::Index>(k);
    return c(kk) / (c.sum() - c(kk) + s.sum() + 1.0);
}

double sinr_typeS(const CVector& g, const PrecoderSet& p, std::size_t n) {
    require_index(n, static_cast<std::size_t>(p.w_s.cols()), "type-S user");
    const RVector c = (g.adjoint() * p.w_c).cwiseAbs2().transpose();
    const RVector s = (g.adjoint() * p.w_s).cwiseAbs2().transpose();
    const auto nn = static_cast<Eigen::Index>(n);
    return s(nn) / (s.sum() - s(nn) + c.sum() + 1.0);
}

double closed_form_rate_typeC(std::size_t k, std::span<const CMatrix> phi_c, std::span<const CMatrix> phi_hat,
                              std::span<const CMatrix> delta, std::span<const CMatrix> phi_s, double p_d,
                              const ClosedFormOptions& opts) {
    const std::size_t users = phi_c.size();
    require_index(k, users, "type-C user");
    if (phi_hat.size() != users || delta.size() != users) {
        throw ValidationError(fmt::format("closed form: {} covariances but {} estimate and {} error covariances",
                                          users, phi_hat.size(), delta.size()));
    }
    if (!(p_d > 0.0)) {
        throw ValidationError(fmt::format("p_d must be positive, got {}", p_d));
    }
    const auto m = phi_c[k].rows();
    auto check_dim = [&](const CMatrix& a, const char* what) {
        if (a.rows() != m || a.cols() != m) {
            throw ValidationError(fmt::format("closed form: {} is {}x{}, expected {}x{}", what, a.rows(), a.cols(), m, m));
        }
    };
    for (std::size_t i = 0; i < users; ++i) {
        check_dim(phi_c[i], "type-C covariance");
        check_dim(phi_hat[i], "estimate covariance");
        check_dim(delta[i], "error covariance");
    }
    for (const CMatrix& p : phi_s) {
        check_dim(p, "type-S covariance");
    }
    const auto f = [&](const CMatrix& a, const CMatrix& b) {
        return quad_form_expectation_F(a, b, opts.fourth_moment).real();
    };
    const auto trace_of = [](const CMatrix& a, std::size_t i) {
        const double t = a.trace().real();
        if (!(t > 0.0)) {
            throw ValidationError(fmt::format("closed form: estimate covariance of type-C user {} has zero trace", i));
        }
        return t;
    };

    const CMatrix& a = phi_hat[k];
    const double tr_a = trace_of(a, k);
    const CMatrix a_half = psd_sqrt(a);
    const double tr_ad = trace_product(a, delta[k]);
    const double numerator = tr_a + tr_ad / tr_a - f(a_half * delta[k] * a_half, a) / (tr_a * tr_a) +
                             f(a, a) * tr_ad / (tr_a * tr_a * tr_a);

    double denominator = 1.0 / p_d;
    for (std::size_t i = 0; i < users; ++i) {
        if (i == k) {
            continue;
        }
        const CMatrix& b = phi_hat[i];
        const double tr_b = trace_of(b, i);
        const CMatrix b_half = psd_sqrt(b);
        const double tr_bp = trace_product(b, phi_c[k]);
        const CMatrix x = opts.mixed_cross_term ? CMatrix(a_half * phi_c[k] * b_half) : CMatrix(b_half * phi_c[k] * b_half);
        denominator += tr_bp / tr_b - f(x, b) / (tr_b * tr_b) + f(b, b) * tr_bp / (tr_b * tr_b * tr_b);
    }
    for (const CMatrix& p : phi_s) {
        const EigenDecomposition eig = hermitian_eig(p);
        const auto u = eig.vectors.col(0);
        denominator += (u.adjoint() * phi_c[k] * u).real()(0, 0);
    }
    return std::log2(1.0 + numerator / denominator);
}

double closed_form_rate_typeS(std::size_t n, std::span<const CMatrix> phi_s, std::span<const CMatrix> phi_hat,
                              double p_d, const ClosedFormOptions& opts) {
    require_index(n, phi_s.size(), "type-S user");
    if (!(p_d > 0.0)) {
        throw ValidationError(fmt::format("p_d must be positive, got {}", p_d));
    }
    const CMatrix& target = phi_s[n];
    const auto m = target.rows();
    for (const auto* group : {&phi_s, &phi_hat}) {
        for (const CMatrix& x : *group) {
            if (x.rows() != m || x.cols() != m) {
                throw ValidationError(
                    fmt::format("closed form: covariance is {}x{}, expected {}x{}", x.rows(), x.cols(), m, m));
            }
        }
    }
    const auto f = [&](const CMatrix& a, const CMatrix& b) {
        return quad_form_expectation_F(a, b, opts.fourth_moment).real();
    };

    const double numerator = hermitian_eig(target).max_value();
    double denominator = 1.0 / p_d;
    for (std::size_t j = 0; j < phi_s.size(); ++j) {
        if (j == n) {
            continue;
        }
        const EigenDecomposition eig = hermitian_eig(phi_s[j]);
        const auto u = eig.vectors.col(0);
        denominator += (u.adjoint() * target * u).real()(0, 0);
    }
    for (std::size_t k = 0; k < phi_hat.size(); ++k) {
        const CMatrix& b = phi_hat[k];
        const double tr_b = b.trace().real();
        if (!(tr_b > 0.0)) {
            throw ValidationError(fmt::format("closed form: estimate covariance of type-C user {} has zero trace", k));
        }
        const CMatrix b_half = psd_sqrt(b);
        const double tr_bp = trace_product(b, target);
        denominator += tr_bp / tr_b - f(b_half * target * b_half, b) / (tr_b * tr_b) +
                       f(b, b) * tr_bp / (tr_b * tr_b * tr_b);
    }
    return std::log2(1.0 + numerator / denominator);
}

double iid_rate_typeC(std::size_t m, std::size_t k, std::size_t n, double tau, double p_u, double p_d) {
    if (k < 1) {
        throw ValidationError("iid_rate_typeC needs K >= 1");
    }
    if (!(tau > 0.0 && p_u > 0.0 && p_d > 0.0)) {
        throw ValidationError("iid_rate_typeC: tau, p_u and p_d must be positive");
    }
    const double snr = tau * p_u;
    const double num = snr * static_cast<double>(m) + 1.0;
    const double den = (snr + 1.0) * (static_cast<double>(k) - 1.0 + static_cast<double>(n) + 1.0 / p_d);
    return std::log2(1.0 + num / den);
}

double iid_rate_typeS(std::size_t k, std::size_t n, double p_d) {
    if (n < 1) {
        throw ValidationError("iid_rate_typeS needs N >= 1");
    }
    if (!(p_d >= 0.0)) {
        throw ValidationError("iid_rate_typeS: p_d must be non-negative");
    }
    if (p_d == 0.0) {
        return 0.0;
    }
    return std::log2(1.0 + 1.0 / (static_cast<double>(n) - 1.0 + static_cast<double>(k) + 1.0 / p_d));
}

double sum_rate(std::span<const double> rates_c, std::span<const double> rates_s) {
    double s = 0.0;
    for (double r : rates_c) {
        s += r;
    }
    for (double r : rates_s) {
        s += r;
    }
    return s;
}

double spectral_efficiency(double sum, std::size_t t_pilot) {
    if (t_pilot >= 6) {
        throw ValidationError(
            fmt::format("t_pilot = {} leaves no OFDM symbol for data, spectral efficiency would be non-positive",
                        t_pilot));
    }
    return sum * (6.0 - static_cast<double>(t_pilot)) / 7.0;
}

std::size_t pilot_symbols(const Scenario& s, Method method, ConventionalMode conventional) {
    if (is_conventional(method) && conventional == ConventionalMode::AllUsers) {
        const std::size_t need = (s.k + s.n + PilotConfig::kSymbolsPerPilot - 1) / PilotConfig::kSymbolsPerPilot;
        return std::max(s.pilot.t_pilot, need);
    }
    return s.pilot.t_pilot;
}

RateReport ergodic_rates_mc(const Scenario& s, const Realization& r, Method method, const McOptions& opts) {
    const std::size_t trials = opts.trials ? opts.trials : s.mc_trials;
    if (trials < 1) {
        throw ValidationError("Monte Carlo needs at least one trial");
    }
    if (r.phi_c.size() != s.k || r.phi_s.size() != s.n) {
        throw ValidationError(fmt::format("realization has {} type-C and {} type-S covariances, scenario K = {}, N = {}",
                                          r.phi_c.size(), r.phi_s.size(), s.k, s.n));
    }
    s.pilot.validate();
    const bool conventional = is_conventional(method);
    const bool serve_s = !(conventional && opts.conventional == ConventionalMode::TypeCOnly);
    const bool estimate_s = conventional && serve_s;
    const std::size_t t_pilot = pilot_symbols(s, method, opts.conventional);
    PilotConfig pilot = s.pilot;
    pilot.t_pilot = t_pilot;
    const double snr = pilot.training_snr();

    std::vector<UserSampler> c_users;
    std::vector<UserSampler> s_users;
    for (const CMatrix& phi : r.phi_c) {
        c_users.emplace_back(phi, snr, opts.rank_tol);
    }
    for (const CMatrix& phi : r.phi_s) {
        s_users.emplace_back(phi, estimate_s ? snr : 0.0, opts.rank_tol);
    }

    const bool approximate = method == Method::eZF || method == Method::eMRT;
    const std::vector<CMatrix> no_users;
    const TypeSStatistics stats(conventional ? std::span<const CMatrix>(no_users) : std::span<const CMatrix>(r.phi_s),
                                s.m, {opts.rank_tol, approximate ? opts.energy_fraction : 1.0});
    const PowerParams power{s.p_d, s.rho};

    const auto kc = static_cast<Eigen::Index>(s.k);
    const auto ns = static_cast<Eigen::Index>(serve_s ? s.n : 0);
    const auto rows = static_cast<Eigen::Index>(s.m);
    const std::size_t width = static_cast<std::size_t>(kc + ns);
    std::vector<double> per_trial(trials * width);

    auto run_trial = [&](std::size_t t) {
        Rng rng = make_rng(s.seed, Stream::Trial, t);
        // Fixed draw order (fading of all users, then pilot noise of all users), so every
        // method sees the same channels for a given trial.
        std::vector<CVector> h_c(s.k), h_s(s.n), z_c(s.k), z_s(s.n);
        for (std::size_t k = 0; k < s.k; ++k) {
            h_c[k] = complex_normal_vector(c_users[k].rank(), rng);
        }
        for (std::size_t n = 0; n < s.n; ++n) {
            h_s[n] = complex_normal_vector(s_users[n].rank(), rng);
        }
        for (std::size_t k = 0; k < s.k; ++k) {
            z_c[k] = complex_normal_vector(c_users[k].rank(), rng);
        }
        for (std::size_t n = 0; n < s.n; ++n) {
            z_s[n] = complex_normal_vector(s_users[n].rank(), rng);
        }

        CMatrix g(rows, kc + static_cast<Eigen::Index>(s.n));
        CMatrix g_hat(rows, kc + (estimate_s ? static_cast<Eigen::Index>(s.n) : 0));
        auto fill = [&](const UserSampler& u, const CVector& h, const CVector& z, Eigen::Index col, bool estimate) {
            const CVector y = u.root.cast<cd>().cwiseProduct(h);
            g.col(col) = u.basis * y;
            if (estimate) {
                g_hat.col(col) = u.basis * u.shrink.cast<cd>().cwiseProduct(y + z * u.noise_scale);
            }
        };
        for (std::size_t k = 0; k < s.k; ++k) {
            fill(c_users[k], h_c[k], z_c[k], static_cast<Eigen::Index>(k), true);
        }
        for (std::size_t n = 0; n < s.n; ++n) {
            fill(s_users[n], h_s[n], z_s[n], kc + static_cast<Eigen::Index>(n), estimate_s);
        }

        // Conventional precoders put every served user in w_c.
        const PrecoderSet p = stats.build(method, g_hat, power);
        CMatrix w(rows, kc + ns);
        w << p.w_c, p.w_s;

        const Eigen::MatrixXd x = (g.adjoint() * w).cwiseAbs2();
        double* out = per_trial.data() + t * width;
        for (Eigen::Index k = 0; k < kc; ++k) {
            out[k] = std::log2(1.0 + sinr_from_row(x.row(k), k));
        }
        for (Eigen::Index n = 0; n < ns; ++n) {
            out[kc + n] = std::log2(1.0 + sinr_from_row(x.row(kc + n), kc + n));
        }
    };

    const std::size_t jobs = std::max<std::size_t>(1, std::min(opts.jobs, trials));
    if (jobs == 1) {
        for (std::size_t t = 0; t < trials; ++t) {
            run_trial(t);
        }
    } else {
        constexpr std::size_t kBlock = 32;
        std::atomic<std::size_t> next{0};
        std::mutex err_mutex;
        std::size_t err_trial = trials;
        std::exception_ptr err;
        auto worker = [&] {
            for (;;) {
                const std::size_t begin = next.fetch_add(kBlock);
                if (begin >= trials) {
                    return;
                }
                const std::size_t end = std::min(trials, begin + kBlock);
                for (std::size_t t = begin; t < end; ++t) {
                    try {
                        run_trial(t);
                    } catch (...) {
                        const std::lock_guard lock(err_mutex);
                        if (t < err_trial) {
                            err_trial = t;
                            err = std::current_exception();
                        }
                        next.store(trials);
                        return;
                    }
                }
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(jobs);
        for (std::size_t j = 0; j < jobs; ++j) {
            pool.emplace_back(worker);
        }
        for (auto& th : pool) {
            th.join();
        }
        if (err) {
            std::rethrow_exception(err);
        }
    }

    RateReport rep;
    rep.method = method;
    rep.source = RateSource::MonteCarlo;
    rep.trials = trials;
    rep.t_pilot = t_pilot;
    std::vector<double> column(trials);
    std::vector<double> avg_c(trials, 0.0), avg_s(trials, 0.0), total(trials, 0.0);
    for (std::size_t u = 0; u < width; ++u) {
        for (std::size_t t = 0; t < trials; ++t) {
            column[t] = per_trial[t * width + u];
        }
        const MeanSe ms = mean_and_se(column);
        const bool is_c = u < s.k;
        (is_c ? rep.per_user_c : rep.per_user_s).push_back(ms.mean);
        (is_c ? rep.per_user_c_se : rep.per_user_s_se).push_back(ms.se);
        for (std::size_t t = 0; t < trials; ++t) {
            (is_c ? avg_c : avg_s)[t] += column[t];
            total[t] += column[t];
        }
    }
    if (s.k > 0) {
        for (double& v : avg_c) {
            v /= static_cast<double>(s.k);
        }
        const MeanSe ms = mean_and_se(avg_c);
        rep.avg_c = ms.mean;
        rep.avg_c_se = ms.se;
    }
    if (ns > 0) {
        for (double& v : avg_s) {
            v /= static_cast<double>(ns);
        }
        const MeanSe ms = mean_and_se(avg_s);
        rep.avg_s = ms.mean;
        rep.avg_s_se = ms.se;
    } else {
        rep.avg_s_se = kNaN;
    }
    rep.sum_rate = sum_rate(rep.per_user_c, rep.per_user_s);
    rep.sum_rate_se = mean_and_se(total).se;
    rep.spectral_efficiency = spectral_efficiency(rep.sum_rate, t_pilot);
    return rep;
}

RateReport ergodic_rates_mc(const Scenario& s, Method method, const McOptions& opts) {
    return ergodic_rates_mc(s, realize(s), method, opts);
}

RateReport closed_form_report(const Scenario& s, const Realization& r, const ClosedFormOptions& opts) {
    std::vector<CMatrix> phi_hat;
    std::vector<CMatrix> delta;
    for (const CMatrix& phi : r.phi_c) {
        const MmseEstimator est(phi, s.pilot);
        phi_hat.push_back(est.phi_hat());
        delta.push_back(est.delta());
    }
    RateReport rep;
    rep.method = Method::SBM;
    rep.source = RateSource::ClosedForm;
    rep.t_pilot = s.pilot.t_pilot;
    for (std::size_t k = 0; k < r.phi_c.size(); ++k) {
        rep.per_user_c.push_back(closed_form_rate_typeC(k, r.phi_c, phi_hat, delta, r.phi_s, s.p_d, opts));
        rep.per_user_c_se.push_back(kNaN);
    }
    for (std::size_t n = 0; n < r.phi_s.size(); ++n) {
        rep.per_user_s.push_back(closed_form_rate_typeS(n, r.phi_s, phi_hat, s.p_d, opts));
        rep.per_user_s_se.push_back(kNaN);
    }
    rep.avg_c = mean_of(rep.per_user_c);
    rep.avg_s = mean_of(rep.per_user_s);
    rep.avg_c_se = rep.avg_s_se = rep.sum_rate_se = kNaN;
    rep.sum_rate = sum_rate(rep.per_user_c, rep.per_user_s);
    rep.spectral_efficiency = spectral_efficiency(rep.sum_rate, rep.t_pilot);
    return rep;
}

RateReport iid_closed_form_report(const Scenario& s) {
    RateReport rep;
    rep.method = Method::SBM;
    rep.source = RateSource::IIDClosedForm;
    rep.t_pilot = s.pilot.t_pilot;
    const double tau = static_cast<double>(s.pilot.tau());
    if (s.k > 0) {
        rep.per_user_c.assign(s.k, iid_rate_typeC(s.m, s.k, s.n, tau, s.pilot.p_u, s.p_d));
        rep.per_user_c_se.assign(s.k, kNaN);
    }
    if (s.n > 0) {
        rep.per_user_s.assign(s.n, iid_rate_typeS(s.k, s.n, s.p_d));
        rep.per_user_s_se.assign(s.n, kNaN);
    }
    rep.avg_c = mean_of(rep.per_user_c);
    rep.avg_s = mean_of(rep.per_user_s);
    rep.avg_c_se = rep.avg_s_se = rep.sum_rate_se = kNaN;
    rep.sum_rate = sum_rate(rep.per_user_c, rep.per_user_s);
    rep.spectral_efficiency = spectral_efficiency(rep.sum_rate, rep.t_pilot);
    return rep;
}

} // namespace mixcsi
