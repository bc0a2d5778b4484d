// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The mixcsi authors

#pragma once

#include "mixcsi/rates.hpp"
#include "mixcsi/scenario.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mixcsi {

enum class Axis { p_d_db, m, n, k, t_pilot };
[[nodiscard]] std::string_view to_string(Axis a);
[[nodiscard]] std::optional<Axis> parse_axis(std::string_view s);

struct SweepSpec {
    std::string name = "sweep";
    ScenarioParams base;
    Axis axis = Axis::p_d_db;
    std::vector<double> values;
    std::vector<Method> methods;
    std::vector<RateSource> outputs{RateSource::MonteCarlo};
    ConventionalMode conventional = ConventionalMode::AllUsers;
    double energy_fraction = 0.999;

    /// Values non-empty and strictly increasing, integral for integer axes, methods non-empty,
    /// closed forms only next to SBM.
    void validate() const;
};

/// Sweep-only keys accepted next to the scenario keys.
[[nodiscard]] const std::vector<std::string_view>& sweep_keys();
[[nodiscard]] SweepSpec sweep_from_kv(const KvFile& f);
[[nodiscard]] SweepSpec read_sweep_file(const std::string& path);

/// Base scenario with the axis set to `value`.
[[nodiscard]] ScenarioParams apply_axis(const ScenarioParams& base, Axis axis, double value);

struct CsvRow {
    double axis_value = 0.0;
    Method method = Method::SBM;
    RateSource source = RateSource::MonteCarlo;
    std::string user_class; // "typeC" or "typeS"
    double mean_rate = 0.0;
    double std_err = 0.0;
    double sum_rate = 0.0;
    double spectral_efficiency = 0.0;
};

struct SweepFailure {
    double axis_value = 0.0;
    Method method = Method::SBM;
    RateSource source = RateSource::MonteCarlo;
    std::string kind; // "validation" or "infeasible"
    std::string message;
};

struct SweepResult {
    std::vector<CsvRow> rows;
    std::vector<SweepFailure> failures;
};

struct SweepOptions {
    std::size_t jobs = 1;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trials;
};

/// Runs every (value, method, output) point. Failing points are recorded and skipped.
[[nodiscard]] SweepResult run_sweep(const SweepSpec& spec, const SweepOptions& opts = {});

/// Rows for one report: one per user class present.
[[nodiscard]] std::vector<CsvRow> report_rows(double axis_value, const RateReport& rep);

inline constexpr std::string_view kCsvHeader =
    "axis_value,method,source,user_class,mean_rate,std_err,sum_rate,spectral_efficiency";

/// Sorted by (axis_value, method, source, user_class).
void sort_rows(std::vector<CsvRow>& rows);
[[nodiscard]] std::string format_csv(const std::vector<CsvRow>& rows);
[[nodiscard]] std::vector<CsvRow> parse_csv(std::string_view text, const std::string& source = "<csv>");
[[nodiscard]] std::string format_failures(const std::vector<SweepFailure>& failures);

/// Writes <out_dir>/<name>.csv and <out_dir>/<name>.failures.csv. Returns the CSV path.
std::filesystem::path write_sweep(const SweepSpec& spec, const SweepResult& result,
                                  const std::filesystem::path& out_dir);

/// One whitespace-separated (x, y) file per (method, user_class, source) curve, named
/// <stem>.<method>.<user_class>.<source>.dat. Returns the written paths in name order.
std::vector<std::filesystem::path> emit_plotdata(const std::filesystem::path& csv_path,
                                                 const std::filesystem::path& out_dir);

void write_text_file(const std::filesystem::path& path, std::string_view text);
[[nodiscard]] std::string read_text_file(const std::filesystem::path& path);

} // namespace mixcsi
