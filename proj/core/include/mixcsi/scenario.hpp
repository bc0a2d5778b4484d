// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The mixcsi authors

#pragma once

#include "mixcsi/channel.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mixcsi {

[[nodiscard]] inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
[[nodiscard]] double deg_to_rad(double deg);

// Scenario in file units (dB, degrees). One field per file key.
struct ScenarioParams {
    std::size_t m = 100;
    std::size_t k = 5;
    std::size_t n = 1;
    std::size_t t_pilot = 1;
    double p_u_db = 10.0;
    double p_d_db = 10.0;
    std::optional<double> rho_db; // defaults to p_d_db
    std::uint64_t seed = 1;
    std::size_t trials = 20000;
    std::size_t l_paths = 20;
    double angle_spread_deg = 10.0;
    double varsigma_deg = 90.0;

    bool operator==(const ScenarioParams&) const = default;
};

// Everything one simulation needs, in library units (linear powers, radians).
struct Scenario {
    std::size_t m = 100;
    std::size_t k = 5;
    std::size_t n = 1;
    PilotConfig pilot;
    double p_d = 10.0;
    double rho = 10.0;
    std::vector<UserGeometry> type_c;
    std::vector<UserGeometry> type_s;
    std::uint64_t seed = 1;
    std::size_t mc_trials = 20000;
};

/// Mean AOAs varsigma + 2 pi n / N (mod 2 pi), n = 0..N-1, all with the same spread and L.
[[nodiscard]] std::vector<UserGeometry> place_typeS_users(std::size_t n_users, double varsigma, double angle_spread,
                                                          std::size_t num_paths);

/// K mean AOAs drawn uniformly over [0, pi].
[[nodiscard]] std::vector<UserGeometry> place_typeC_users(std::size_t k_users, Rng& rng,
                                                          double angle_spread = deg_to_rad(10.0),
                                                          std::size_t num_paths = 20);

/// Converts units and places users. Type-C placement draws from the seed's placement
/// stream, so user k keeps its AOA when K grows.
[[nodiscard]] Scenario make_scenario(const ScenarioParams& params);

struct Diagnostic {
    enum class Severity { Warning, Error };
    Severity severity = Severity::Warning;
    std::string code;
    std::string message;
};

[[nodiscard]] std::vector<Diagnostic> validate(const Scenario& s);
[[nodiscard]] bool has_errors(const std::vector<Diagnostic>& diags);

// Covariances of one scenario. Fixed for the whole simulation; user k of each class
// draws from its own stream.
struct Realization {
    std::vector<CMatrix> phi_c;
    std::vector<CMatrix> phi_s;
};

[[nodiscard]] Realization realize(const Scenario& s);

// ---- flat key = value files ------------------------------------------------

// One `key = value` line. Values are numbers, "strings" or [lists].
struct KvEntry {
    std::string key;
    std::string value;
    std::size_t line = 0;
};

struct KvFile {
    std::string source; // file name for diagnostics
    std::vector<KvEntry> entries;

    [[nodiscard]] const KvEntry* find(std::string_view key) const;
};

/// Parses `text`. Blank lines and `#` comments are skipped; duplicate keys are errors.
[[nodiscard]] KvFile parse_kv(std::string_view text, std::string source = "<input>");
[[nodiscard]] KvFile read_kv_file(const std::string& path);

[[nodiscard]] double kv_double(const KvFile& f, const KvEntry& e);
[[nodiscard]] std::int64_t kv_int(const KvFile& f, const KvEntry& e);
[[nodiscard]] std::uint64_t kv_uint(const KvFile& f, const KvEntry& e);
[[nodiscard]] std::string kv_string(const KvFile& f, const KvEntry& e);
/// `[a, b, c]` with items as raw text (quotes removed).
[[nodiscard]] std::vector<std::string> kv_list(const KvFile& f, const KvEntry& e);

/// Keys understood by scenario files.
[[nodiscard]] const std::vector<std::string_view>& scenario_keys();

/// Reads scenario keys from `f`. Keys not in `scenario_keys()` and not in `extra_keys` are rejected.
[[nodiscard]] ScenarioParams scenario_from_kv(const KvFile& f, const std::vector<std::string_view>& extra_keys = {});
[[nodiscard]] ScenarioParams parse_scenario(std::string_view text, std::string source = "<input>");

/// Canonical form: every key in `scenario_keys()` order, shortest round-trip number formatting.
[[nodiscard]] std::string emit_scenario(const ScenarioParams& p);

} // namespace mixcsi
