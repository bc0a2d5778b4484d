// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The mixcsi authors

#include "mixcsi/experiment.hpp"

#include "mixcsi/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>
#include <tuple>

namespace mixcsi {

namespace {

constexpr std::array<std::pair<Axis, std::string_view>, 5> kAxisNames{{
    {Axis::p_d_db, "p_d_db"},
    {Axis::m, "m"},
    {Axis::n, "n"},
    {Axis::k, "k"},
    {Axis::t_pilot, "t_pilot"},
}};

std::string num(double v) {
    return fmt::format("{:.10g}", v);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    for (;;) {
        const auto at = s.find(sep, pos);
        out.push_back(s.substr(pos, at == std::string_view::npos ? std::string_view::npos : at - pos));
        if (at == std::string_view::npos) {
            return out;
        }
        pos = at + 1;
    }
}

bool is_integer_axis(Axis a) {
    return a != Axis::p_d_db;
}

struct Task {
    double value = 0.0;
    Method method = Method::SBM;
    RateSource source = RateSource::MonteCarlo;
};

struct TaskOutcome {
    std::vector<CsvRow> rows;
    std::optional<SweepFailure> failure;
};

} // namespace

std::string_view to_string(Axis a) {
    for (const auto& [axis, name] : kAxisNames) {
        if (axis == a) {
            return name;
        }
    }
    return "?";
}

std::optional<Axis> parse_axis(std::string_view s) {
    for (const auto& [axis, name] : kAxisNames) {
        if (s == name) {
            return axis;
        }
    }
    return std::nullopt;
}

void SweepSpec::validate() const {
    if (values.empty()) {
        throw ValidationError(fmt::format("sweep `{}`: values must not be empty", name));
    }
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (!(values[i] > values[i - 1])) {
            throw ValidationError(fmt::format("sweep `{}`: values must be strictly increasing ({} after {})", name,
                                              values[i], values[i - 1]));
        }
    }
    if (is_integer_axis(axis)) {
        for (double v : values) {
            if (v != std::floor(v) || v < 0.0) {
                throw ValidationError(
                    fmt::format("sweep `{}`: axis {} needs non-negative integer values, got {}", name, to_string(axis), v));
            }
        }
    }
    if (methods.empty()) {
        throw ValidationError(fmt::format("sweep `{}`: methods must not be empty", name));
    }
    if (outputs.empty()) {
        throw ValidationError(fmt::format("sweep `{}`: outputs must not be empty", name));
    }
    const bool closed = std::any_of(outputs.begin(), outputs.end(),
                                    [](RateSource r) { return r != RateSource::MonteCarlo; });
    if (closed && std::find(methods.begin(), methods.end(), Method::SBM) == methods.end()) {
        throw ValidationError(
            fmt::format("sweep `{}`: closed-form outputs exist only for SBM, add SBM to methods", name));
    }
    if (!(energy_fraction > 0.0 && energy_fraction <= 1.0)) {
        throw ValidationError(fmt::format("sweep `{}`: energy_fraction must lie in (0, 1]", name));
    }
}

const std::vector<std::string_view>& sweep_keys() {
    static const std::vector<std::string_view> keys{"name",    "axis",         "values",         "methods",
                                                    "outputs", "conventional", "energy_fraction"};
    return keys;
}

SweepSpec sweep_from_kv(const KvFile& f) {
    SweepSpec spec;
    spec.base = scenario_from_kv(f, sweep_keys());
    auto fail = [&](const KvEntry& e, const std::string& what) {
        throw ValidationError(fmt::format("{}:{}: {}: {}", f.source, e.line, e.key, what));
    };
    if (const KvEntry* e = f.find("name")) {
        spec.name = kv_string(f, *e);
        const bool ok = !spec.name.empty() && std::all_of(spec.name.begin(), spec.name.end(), [](char c) {
            return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
        });
        if (!ok) {
            fail(*e, "name may only contain letters, digits, '_' and '-'");
        }
    }
    const KvEntry* axis = f.find("axis");
    if (!axis) {
        throw ValidationError(fmt::format("{}: missing key `axis`", f.source));
    }
    const auto a = parse_axis(kv_string(f, *axis));
    if (!a) {
        fail(*axis, "expected one of p_d_db, m, n, k, t_pilot");
    }
    spec.axis = *a;

    const KvEntry* values = f.find("values");
    if (!values) {
        throw ValidationError(fmt::format("{}: missing key `values`", f.source));
    }
    for (const std::string& item : kv_list(f, *values)) {
        const KvEntry tmp{values->key, item, values->line};
        spec.values.push_back(kv_double(f, tmp));
    }

    const KvEntry* methods = f.find("methods");
    if (!methods) {
        throw ValidationError(fmt::format("{}: missing key `methods`", f.source));
    }
    for (const std::string& item : kv_list(f, *methods)) {
        const auto m = parse_method(item);
        if (!m) {
            fail(*methods, fmt::format("unknown method `{}` (expected ZF, MRT, SBM, eZF, eMRT)", item));
        }
        if (std::find(spec.methods.begin(), spec.methods.end(), *m) != spec.methods.end()) {
            fail(*methods, fmt::format("method `{}` listed twice", item));
        }
        spec.methods.push_back(*m);
    }

    if (const KvEntry* outputs = f.find("outputs")) {
        spec.outputs.clear();
        for (const std::string& item : kv_list(f, *outputs)) {
            const auto r = parse_source(item);
            if (!r) {
                fail(*outputs, fmt::format("unknown output `{}` (expected MC, ClosedForm, IIDClosedForm)", item));
            }
            spec.outputs.push_back(*r);
        }
    }
    if (const KvEntry* conv = f.find("conventional")) {
        const std::string v = kv_string(f, *conv);
        if (const auto mode = parse_conventional(v)) {
            spec.conventional = *mode;
        } else {
            fail(*conv, fmt::format("expected \"all\" or \"type_c_only\", got \"{}\"", v));
        }
    }
    if (const KvEntry* e = f.find("energy_fraction")) {
        spec.energy_fraction = kv_double(f, *e);
    }
    spec.validate();
    return spec;
}

SweepSpec read_sweep_file(const std::string& path) {
    return sweep_from_kv(read_kv_file(path));
}

ScenarioParams apply_axis(const ScenarioParams& base, Axis axis, double value) {
    ScenarioParams p = base;
    const auto as_size = [&] { return static_cast<std::size_t>(std::llround(value)); };
    switch (axis) {
    case Axis::p_d_db:
        p.p_d_db = value;
        break;
    case Axis::m:
        p.m = as_size();
        break;
    case Axis::n:
        p.n = as_size();
        break;
    case Axis::k:
        p.k = as_size();
        break;
    case Axis::t_pilot:
        p.t_pilot = as_size();
        break;
    }
    return p;
}

std::vector<CsvRow> report_rows(double axis_value, const RateReport& rep) {
    std::vector<CsvRow> rows;
    if (!rep.per_user_c.empty()) {
        rows.push_back({axis_value, rep.method, rep.source, "typeC", rep.avg_c, rep.avg_c_se, rep.sum_rate,
                        rep.spectral_efficiency});
    }
    if (!rep.per_user_s.empty()) {
        rows.push_back({axis_value, rep.method, rep.source, "typeS", rep.avg_s, rep.avg_s_se, rep.sum_rate,
                        rep.spectral_efficiency});
    }
    return rows;
}

SweepResult run_sweep(const SweepSpec& spec, const SweepOptions& opts) {
    spec.validate();
    std::vector<Task> tasks;
    for (double v : spec.values) {
        for (Method m : spec.methods) {
            for (RateSource src : spec.outputs) {
                if (src != RateSource::MonteCarlo && m != Method::SBM) {
                    continue;
                }
                tasks.push_back({v, m, src});
            }
        }
    }

    const std::size_t jobs = std::max<std::size_t>(1, opts.jobs);
    const std::size_t workers = std::min(jobs, tasks.size());
    const std::size_t inner_jobs = std::max<std::size_t>(1, jobs / std::max<std::size_t>(1, workers));

    std::vector<TaskOutcome> outcomes(tasks.size());
    auto run_task = [&](std::size_t i) {
        const Task& t = tasks[i];
        TaskOutcome& out = outcomes[i];
        auto record = [&](std::string kind, std::string message) {
            out.failure = SweepFailure{t.value, t.method, t.source, std::move(kind), std::move(message)};
        };
        try {
            ScenarioParams params = apply_axis(spec.base, spec.axis, t.value);
            if (opts.seed) {
                params.seed = *opts.seed;
            }
            if (opts.trials) {
                params.trials = *opts.trials;
            }
            const Scenario s = make_scenario(params);
            const auto diags = validate(s);
            if (has_errors(diags)) {
                std::string msg;
                for (const Diagnostic& d : diags) {
                    if (d.severity == Diagnostic::Severity::Error) {
                        msg += (msg.empty() ? "" : "; ") + d.message;
                    }
                }
                record("validation", msg);
                return;
            }
            RateReport rep;
            if (t.source == RateSource::IIDClosedForm) {
                rep = iid_closed_form_report(s);
            } else {
                const Realization r = realize(s);
                if (t.source == RateSource::ClosedForm) {
                    rep = closed_form_report(s, r);
                } else {
                    McOptions mc;
                    mc.jobs = inner_jobs;
                    mc.conventional = spec.conventional;
                    mc.energy_fraction = spec.energy_fraction;
                    rep = ergodic_rates_mc(s, r, t.method, mc);
                }
            }
            out.rows = report_rows(t.value, rep);
        } catch (const InfeasibleError& e) {
            record("infeasible", e.what());
        } catch (const ValidationError& e) {
            record("validation", e.what());
        }
    };

    if (workers <= 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            run_task(i);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < tasks.size(); i = next++) {
                    run_task(i);
                }
            });
        }
        for (auto& th : pool) {
            th.join();
        }
    }

    SweepResult result;
    for (TaskOutcome& o : outcomes) {
        result.rows.insert(result.rows.end(), o.rows.begin(), o.rows.end());
        if (o.failure) {
            result.failures.push_back(std::move(*o.failure));
        }
    }
    sort_rows(result.rows);
    return result;
}

void sort_rows(std::vector<CsvRow>& rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const CsvRow& a, const CsvRow& b) {
        return std::tie(a.axis_value, a.method, a.source, a.user_class) <
               std::tie(b.axis_value, b.method, b.source, b.user_class);
    });
}

std::string format_csv(const std::vector<CsvRow>& rows) {
    std::string out(kCsvHeader);
    out += '\n';
    for (const CsvRow& r : rows) {
        out += fmt::format("{},{},{},{},{},{},{},{}\n", num(r.axis_value), to_string(r.method), to_string(r.source),
                           r.user_class, num(r.mean_rate), num(r.std_err), num(r.sum_rate),
                           num(r.spectral_efficiency));
    }
    return out;
}

std::vector<CsvRow> parse_csv(std::string_view text, const std::string& source) {
    std::vector<CsvRow> rows;
    auto lines = split(text, '\n');
    if (!lines.empty() && lines.back().empty()) {
        lines.pop_back();
    }
    if (lines.empty() || lines.front() != kCsvHeader) {
        throw ValidationError(fmt::format("{}:1: expected header `{}`", source, kCsvHeader));
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto fields = split(lines[i], ',');
        const auto bad = [&](const std::string& what) {
            return ValidationError(fmt::format("{}:{}: {}", source, i + 1, what));
        };
        if (fields.size() != 8) {
            throw bad(fmt::format("expected 8 fields, got {}", fields.size()));
        }
        const auto number = [&](std::string_view s) {
            if (s == "nan") {
                return std::numeric_limits<double>::quiet_NaN();
            }
            const KvFile f{source, {}};
            return kv_double(f, KvEntry{"value", std::string(s), i + 1});
        };
        CsvRow r;
        r.axis_value = number(fields[0]);
        const auto m = parse_method(fields[1]);
        const auto src = parse_source(fields[2]);
        if (!m || !src) {
            throw bad("unknown method or source");
        }
        r.method = *m;
        r.source = *src;
        r.user_class = std::string(fields[3]);
        r.mean_rate = number(fields[4]);
        r.std_err = number(fields[5]);
        r.sum_rate = number(fields[6]);
        r.spectral_efficiency = number(fields[7]);
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string format_failures(const std::vector<SweepFailure>& failures) {
    std::string out = "axis_value,method,source,kind,message\n";
    for (const SweepFailure& f : failures) {
        std::string msg = f.message;
        std::replace(msg.begin(), msg.end(), '"', '\'');
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        out += fmt::format("{},{},{},{},\"{}\"\n", num(f.axis_value), to_string(f.method), to_string(f.source), f.kind,
                           msg);
    }
    return out;
}

std::filesystem::path write_sweep(const SweepSpec& spec, const SweepResult& result,
                                  const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw IoError(fmt::format("cannot create `{}`: {}", out_dir.string(), ec.message()));
    }
    const auto csv = out_dir / (spec.name + ".csv");
    write_text_file(csv, format_csv(result.rows));
    write_text_file(out_dir / (spec.name + ".failures.csv"), format_failures(result.failures));
    return csv;
}

std::vector<std::filesystem::path> emit_plotdata(const std::filesystem::path& csv_path,
                                                 const std::filesystem::path& out_dir) {
    const std::vector<CsvRow> rows = parse_csv(read_text_file(csv_path), csv_path.string());
    std::map<std::string, std::vector<const CsvRow*>> curves;
    for (const CsvRow& r : rows) {
        const std::string name = fmt::format("{}.{}.{}.{}.dat", csv_path.stem().string(), to_string(r.method),
                                             r.user_class, to_string(r.source));
        curves[name].push_back(&r);
    }
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw IoError(fmt::format("cannot create `{}`: {}", out_dir.string(), ec.message()));
    }
    std::vector<std::filesystem::path> written;
    for (auto& [name, points] : curves) {
        std::stable_sort(points.begin(), points.end(),
                         [](const CsvRow* a, const CsvRow* b) { return a->axis_value < b->axis_value; });
        std::string text;
        for (const CsvRow* p : points) {
            text += fmt::format("{} {}\n", num(p->axis_value), num(p->mean_rate));
        }
        const auto path = out_dir / name;
        write_text_file(path, text);
        written.push_back(path);
    }
    return written;
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError(fmt::format("cannot open `{}` for writing", path.string()));
    }
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) {
        throw IoError(fmt::format("error writing `{}`", path.string()));
    }
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(fmt::format("cannot open `{}`", path.string()));
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace mixcsi
