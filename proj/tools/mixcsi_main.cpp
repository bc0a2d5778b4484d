// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The mixcsi authors

#include "mixcsi/errors.hpp"
#include "mixcsi/experiment.hpp"
#include "mixcsi/rates.hpp"
#include "mixcsi/scenario.hpp"

#include <CLI11.hpp>
#include <fmt/core.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace mixcsi;

namespace {

enum ExitCode : int { kOk = 0, kValidation = 1, kInfeasible = 2, kIo = 3 };

constexpr const char* kInfeasibleHint =
    "hint: raise M or lower D_n (truncate the type-S covariances with a smaller --energy-fraction)";

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trials;
    std::vector<std::string> methods;
    std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
};

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
    std::vector<Method> out;
    for (const std::string& name : names) {
        const auto m = parse_method(name);
        if (!m) {
            throw ValidationError(fmt::format("unknown method \"{}\" (expected ZF, MRT, SBM, eZF or eMRT)", name));
        }
        if (std::find(out.begin(), out.end(), *m) == out.end()) {
            out.push_back(*m);
        }
    }
    if (out.empty()) {
        throw ValidationError("--methods needs at least one method");
    }
    return out;
}

std::vector<RateSource> parse_sources(const std::vector<std::string>& names) {
    std::vector<RateSource> out;
    for (const std::string& name : names) {
        const auto s = parse_source(name);
        if (!s) {
            throw ValidationError(fmt::format("unknown source \"{}\" (expected MC, ClosedForm or IIDClosedForm)", name));
        }
        out.push_back(*s);
    }
    return out;
}

void print_diagnostics(const std::vector<Diagnostic>& diags, const std::string& where) {
    for (const Diagnostic& d : diags) {
        fmt::print(stderr, "{}{} [{}]: {}\n", where.empty() ? "" : where + ": ",
                   d.severity == Diagnostic::Severity::Error ? "error" : "warning", d.code, d.message);
    }
}

json rates_json(const std::vector<double>& rates, const std::vector<double>& se) {
    json arr = json::array();
    for (std::size_t i = 0; i < rates.size(); ++i) {
        arr.push_back({{"rate", rates[i]}, {"std_err", std::isnan(se[i]) ? json(nullptr) : json(se[i])}});
    }
    return arr;
}

json report_json(const RateReport& r) {
    auto opt = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
    return {
        {"method", std::string(to_string(r.method))},
        {"source", std::string(to_string(r.source))},
        {"trials", r.trials},
        {"t_pilot", r.t_pilot},
        {"type_c", rates_json(r.per_user_c, r.per_user_c_se)},
        {"type_s", rates_json(r.per_user_s, r.per_user_s_se)},
        {"avg_c", r.avg_c},
        {"avg_s", r.avg_s},
        {"avg_c_std_err", opt(r.avg_c_se)},
        {"avg_s_std_err", opt(r.avg_s_se)},
        {"sum_rate", r.sum_rate},
        {"sum_rate_std_err", opt(r.sum_rate_se)},
        {"spectral_efficiency", opt(r.spectral_efficiency)},
    };
}

json params_json(const ScenarioParams& p) {
    json j = {
        {"m", p.m},
        {"k", p.k},
        {"n", p.n},
        {"t_pilot", p.t_pilot},
        {"p_u_db", p.p_u_db},
        {"p_d_db", p.p_d_db},
        {"seed", p.seed},
        {"trials", p.trials},
        {"l_paths", p.l_paths},
        {"angle_spread_deg", p.angle_spread_deg},
        {"varsigma_deg", p.varsigma_deg},
    };
    j["rho_db"] = p.rho_db ? json(*p.rho_db) : json(nullptr);
    return j;
}

void print_table(const std::vector<RateReport>& reports) {
    fmt::print("{:<6} {:<14} {:<6} {:>5} {:>12} {:>10}\n", "method", "source", "class", "user", "rate", "std_err");
    for (const RateReport& r : reports) {
        auto rows = [&](const char* cls, const std::vector<double>& rates, const std::vector<double>& se) {
            for (std::size_t i = 0; i < rates.size(); ++i) {
                fmt::print("{:<6} {:<14} {:<6} {:>5} {:>12.6f} {:>10}\n", to_string(r.method), to_string(r.source),
                           cls, i, rates[i], std::isnan(se[i]) ? std::string("-") : fmt::format("{:.6f}", se[i]));
            }
        };
        rows("typeC", r.per_user_c, r.per_user_c_se);
        rows("typeS", r.per_user_s, r.per_user_s_se);
    }
    fmt::print("\n{:<6} {:<14} {:>10} {:>10} {:>10} {:>10}\n", "method", "source", "avg_c", "avg_s", "sum_rate",
               "SE");
    for (const RateReport& r : reports) {
        fmt::print("{:<6} {:<14} {:>10.4f} {:>10.4f} {:>10.4f} {:>10.4f}\n", to_string(r.method), to_string(r.source),
                   r.avg_c, r.avg_s, r.sum_rate, r.spectral_efficiency);
    }
}

struct RunArgs {
    std::string scenario;
    std::string out = "mixcsi-out";
    std::vector<std::string> sources{"MC", "ClosedForm"};
    std::string conventional = "all";
    double energy_fraction = 0.999;
};

int cmd_run(const RunArgs& args, const Overrides& ov) {
    ScenarioParams p = args.scenario.empty() ? ScenarioParams{} : scenario_from_kv(read_kv_file(args.scenario));
    if (ov.seed) {
        p.seed = *ov.seed;
    }
    if (ov.trials) {
        p.trials = *ov.trials;
    }
    const std::vector<Method> methods =
        ov.methods.empty() ? std::vector<Method>{Method::ZF, Method::MRT, Method::SBM, Method::eZF, Method::eMRT}
                           : parse_methods(ov.methods);
    const std::vector<RateSource> sources = parse_sources(args.sources);
    const auto conventional = parse_conventional(args.conventional);
    if (!conventional) {
        throw ValidationError(
            fmt::format("--conventional: expected \"all\" or \"type_c_only\", got \"{}\"", args.conventional));
    }
    if (!(args.energy_fraction > 0.0 && args.energy_fraction <= 1.0)) {
        throw ValidationError("--energy-fraction must lie in (0, 1]");
    }

    const Scenario s = make_scenario(p);
    const auto diags = validate(s);
    print_diagnostics(diags, args.scenario);
    if (has_errors(diags)) {
        return kValidation;
    }
    const Realization r = realize(s);

    McOptions mc;
    mc.jobs = ov.jobs;
    mc.conventional = *conventional;
    mc.energy_fraction = args.energy_fraction;

    std::vector<RateReport> reports;
    json failures = json::array();
    int code = kOk;
    for (Method m : methods) {
        for (RateSource src : sources) {
            if (src != RateSource::MonteCarlo && m != Method::SBM) {
                continue; // closed forms exist for SBM only
            }
            try {
                switch (src) {
                case RateSource::MonteCarlo:
                    reports.push_back(ergodic_rates_mc(s, r, m, mc));
                    break;
                case RateSource::ClosedForm:
                    reports.push_back(closed_form_report(s, r));
                    break;
                case RateSource::IIDClosedForm:
                    reports.push_back(iid_closed_form_report(s));
                    break;
                }
            } catch (const InfeasibleError& e) {
                fmt::print(stderr, "{} {}: infeasible: {}\n{}\n", to_string(m), to_string(src), e.what(),
                           kInfeasibleHint);
                failures.push_back({{"method", std::string(to_string(m))},
                                    {"source", std::string(to_string(src))},
                                    {"kind", "infeasible"},
                                    {"message", e.what()}});
                code = kInfeasible;
            }
        }
    }

    print_table(reports);

    json diag_json = json::array();
    for (const Diagnostic& d : diags) {
        diag_json.push_back({{"severity", d.severity == Diagnostic::Severity::Error ? "error" : "warning"},
                             {"code", d.code},
                             {"message", d.message}});
    }
    json results = json::array();
    for (const RateReport& rep : reports) {
        results.push_back(report_json(rep));
    }
    const json doc = {
        {"scenario", params_json(p)},
        {"conventional", std::string(to_string(*conventional))},
        {"energy_fraction", args.energy_fraction},
        {"diagnostics", diag_json},
        {"results", results},
        {"failures", failures},
    };
    const fs::path path = fs::path(args.out) / "report.json";
    fs::create_directories(path.parent_path());
    write_text_file(path, doc.dump(2) + "\n");
    fmt::print("\nwrote {}\n", path.string());
    return code;
}

struct SweepArgs {
    std::string spec;
    std::string out = "mixcsi-out";
};

int cmd_sweep(const SweepArgs& args, const Overrides& ov) {
    SweepSpec spec = read_sweep_file(args.spec);
    if (!ov.methods.empty()) {
        spec.methods = parse_methods(ov.methods);
        spec.validate();
    }
    SweepOptions opts;
    opts.jobs = ov.jobs;
    opts.seed = ov.seed;
    opts.trials = ov.trials;
    const SweepResult result = run_sweep(spec, opts);
    const fs::path csv = write_sweep(spec, result, args.out);
    fmt::print("{}: {} rows, {} failed points -> {}\n", spec.name, result.rows.size(), result.failures.size(),
               csv.string());
    bool infeasible = false;
    for (const SweepFailure& f : result.failures) {
        fmt::print(stderr, "  {} = {}, {} {}: {}: {}\n", to_string(spec.axis), f.axis_value, to_string(f.method),
                   to_string(f.source), f.kind, f.message);
        infeasible = infeasible || f.kind == "infeasible";
    }
    if (infeasible) {
        fmt::print(stderr, "{}\n", kInfeasibleHint);
    }
    if (result.rows.empty() && !result.failures.empty()) {
        return result.failures.front().kind == "infeasible" ? kInfeasible : kValidation;
    }
    return kOk;
}

int cmd_plotdata(const std::string& csv, const std::string& out) {
    const auto files = emit_plotdata(csv, out);
    for (const fs::path& f : files) {
        fmt::print("{}\n", f.string());
    }
    return kOk;
}

int cmd_validate(const std::string& path) {
    const KvFile f = read_kv_file(path);
    std::size_t errors = 0, warnings = 0;
    auto check = [&](const ScenarioParams& p, const std::string& where) {
        const auto diags = validate(make_scenario(p));
        print_diagnostics(diags, where);
        for (const Diagnostic& d : diags) {
            (d.severity == Diagnostic::Severity::Error ? errors : warnings) += 1;
        }
    };
    if (f.find("axis")) {
        const SweepSpec spec = sweep_from_kv(f);
        for (double v : spec.values) {
            check(apply_axis(spec.base, spec.axis, v), fmt::format("{} ({} = {})", path, to_string(spec.axis), v));
        }
    } else {
        check(scenario_from_kv(f), path);
    }
    fmt::print("{}: {} error(s), {} warning(s)\n", path, errors, warnings);
    return errors == 0 ? kOk : kValidation;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mixed-CSI massive MIMO downlink precoding simulator"};
    app.require_subcommand(1);

    Overrides ov;
    auto add_overrides = [&](CLI::App* sub) {
        sub->add_option("--seed", ov.seed, "Override the root seed");
        sub->add_option("--trials", ov.trials, "Override the Monte Carlo trial count")->check(CLI::PositiveNumber);
        sub->add_option("--methods", ov.methods, "Comma-separated methods (ZF, MRT, SBM, eZF, eMRT)")
            ->delimiter(',');
        sub->add_option("--jobs", ov.jobs, "Worker threads")->check(CLI::PositiveNumber);
    };

    RunArgs run_args;
    CLI::App* run = app.add_subcommand("run", "Evaluate one scenario");
    run->add_option("scenario", run_args.scenario, "Scenario file (default scenario if omitted)");
    run->add_option("--out", run_args.out, "Output directory for report.json");
    run->add_option("--sources", run_args.sources, "Comma-separated rate sources (MC, ClosedForm, IIDClosedForm)")
        ->delimiter(',');
    run->add_option("--conventional", run_args.conventional,
                    "Users served by ZF/MRT: all (pilots for K+N) or type_c_only");
    run->add_option("--energy-fraction", run_args.energy_fraction,
                    "Energy kept when truncating type-S covariances for eZF/eMRT");
    add_overrides(run);

    SweepArgs sweep_args;
    CLI::App* sweep = app.add_subcommand("sweep", "Run a parameter sweep and write CSV");
    sweep->add_option("spec", sweep_args.spec, "Sweep file")->required();
    sweep->add_option("--out", sweep_args.out, "Output directory");
    add_overrides(sweep);

    std::string plot_csv, plot_out = "mixcsi-plot";
    CLI::App* plot = app.add_subcommand("plotdata", "Split a sweep CSV into two-column curve files");
    plot->add_option("csv", plot_csv, "Sweep CSV")->required();
    plot->add_option("--out", plot_out, "Output directory");

    std::string validate_path;
    CLI::App* check = app.add_subcommand("validate", "Check a scenario or sweep file");
    check->add_option("file", validate_path, "Scenario or sweep file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kValidation;
    }

    try {
        if (run->parsed()) {
            return cmd_run(run_args, ov);
        }
        if (sweep->parsed()) {
            return cmd_sweep(sweep_args, ov);
        }
        if (plot->parsed()) {
            return cmd_plotdata(plot_csv, plot_out);
        }
        return cmd_validate(validate_path);
    } catch (const ValidationError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kValidation;
    } catch (const InfeasibleError& e) {
        fmt::print(stderr, "infeasible: {}\n{}\n", e.what(), kInfeasibleHint);
        return kInfeasible;
    } catch (const IoError& e) {
        fmt::print(stderr, "I/O error: {}\n", e.what());
        return kIo;
    } catch (const fs::filesystem_error& e) {
        fmt::print(stderr, "I/O error: {}\n", e.what());
        return kIo;
    }
}
