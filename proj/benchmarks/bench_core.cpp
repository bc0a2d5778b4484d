// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The mixcsi authors

#include "mixcsi/channel.hpp"
#include "mixcsi/linalg.hpp"
#include "mixcsi/precoding.hpp"
#include "mixcsi/rates.hpp"
#include "mixcsi/scenario.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace mixcsi;

namespace {

Scenario scenario(std::size_t m, std::size_t n) {
    ScenarioParams p;
    p.m = m;
    p.k = 5;
    p.n = n;
    return make_scenario(p);
}

// One channel estimate per type-C user, stacked as columns.
CMatrix estimates(const Scenario& s, const Realization& r, Rng& rng) {
    CMatrix g_hat(static_cast<Eigen::Index>(s.m), static_cast<Eigen::Index>(s.k));
    for (std::size_t k = 0; k < s.k; ++k) {
        const CVector g = sample_channel(r.phi_c[k], rng);
        g_hat.col(static_cast<Eigen::Index>(k)) = mmse_estimate(g, r.phi_c[k], s.pilot, rng).g_hat;
    }
    return g_hat;
}

void BM_HermitianEig(benchmark::State& state) {
    const Scenario s = scenario(static_cast<std::size_t>(state.range(0)), 1);
    const Realization r = realize(s);
    for (auto _ : state) {
        benchmark::DoNotOptimize(hermitian_eig(r.phi_s[0]));
    }
}
BENCHMARK(BM_HermitianEig)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_SynthCovariance(benchmark::State& state) {
    const Scenario s = scenario(static_cast<std::size_t>(state.range(0)), 1);
    Rng rng(7);
    for (auto _ : state) {
        benchmark::DoNotOptimize(synth_covariance(s.type_c[0], s.m, rng));
    }
}
BENCHMARK(BM_SynthCovariance)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_TypeSStatistics(benchmark::State& state) {
    const Scenario s = scenario(static_cast<std::size_t>(state.range(0)), 5);
    const Realization r = realize(s);
    for (auto _ : state) {
        benchmark::DoNotOptimize(TypeSStatistics(r.phi_s, s.m, {.energy_fraction = 0.999}));
    }
}
BENCHMARK(BM_TypeSStatistics)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

// Precoder construction for one channel draw; K = N = 5.
void BM_Precoders(benchmark::State& state) {
    const auto method = static_cast<Method>(state.range(1));
    const Scenario s = scenario(static_cast<std::size_t>(state.range(0)), 5);
    const Realization r = realize(s);
    const TypeSStatistics stats(r.phi_s, s.m, {.energy_fraction = 0.999});
    Rng rng(11);
    const CMatrix g_hat = estimates(s, r, rng);
    const PowerParams power{s.p_d, s.rho};
    for (auto _ : state) {
        benchmark::DoNotOptimize(stats.build(method, g_hat, power));
    }
    state.SetLabel(std::string(to_string(method)));
}
BENCHMARK(BM_Precoders)
    ->ArgsProduct({{64, 256},
                   {static_cast<long>(Method::ZF), static_cast<long>(Method::MRT), static_cast<long>(Method::SBM),
                    static_cast<long>(Method::eZF), static_cast<long>(Method::eMRT)}})
    ->Unit(benchmark::kMicrosecond);

void BM_MonteCarlo(benchmark::State& state) {
    const auto method = static_cast<Method>(state.range(1));
    const Scenario s = scenario(static_cast<std::size_t>(state.range(0)), 5);
    const Realization r = realize(s);
    McOptions opts;
    opts.trials = 64;
    for (auto _ : state) {
        benchmark::DoNotOptimize(ergodic_rates_mc(s, r, method, opts));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(opts.trials));
    state.SetLabel(std::string(to_string(method)));
}
BENCHMARK(BM_MonteCarlo)
    ->ArgsProduct({{100}, {static_cast<long>(Method::SBM), static_cast<long>(Method::eZF), static_cast<long>(Method::eMRT)}})
    ->Unit(benchmark::kMillisecond);

void BM_ClosedForm(benchmark::State& state) {
    const Scenario s = scenario(static_cast<std::size_t>(state.range(0)), 1);
    const Realization r = realize(s);
    for (auto _ : state) {
        benchmark::DoNotOptimize(closed_form_report(s, r));
    }
}
BENCHMARK(BM_ClosedForm)->Arg(64)->Arg(100)->Arg(256)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
