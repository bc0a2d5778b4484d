// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The mixcsi authors

#include "mixcsi/scenario.hpp"

#include "mixcsi/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace mixcsi {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

bool valid_key(std::string_view k) {
    return !k.empty() && std::all_of(k.begin(), k.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
    });
}

// Strips a trailing comment that is not inside a quoted string.
std::string_view strip_comment(std::string_view s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') {
            quoted = !quoted;
        } else if (s[i] == '#' && !quoted) {
            return s.substr(0, i);
        }
    }
    return s;
}

[[noreturn]] void fail_at(const KvFile& f, const KvEntry& e, const std::string& what) {
    throw ValidationError(fmt::format("{}:{}: {}: {}", f.source, e.line, e.key, what));
}

// Range of cos(theta) over the AOA interval; cos is extremal at the endpoints or at multiples of pi.
std::pair<double, double> cos_interval(const UserGeometry& g) {
    const double lo = g.mean_aoa - g.angle_spread / 2.0;
    const double hi = g.mean_aoa + g.angle_spread / 2.0;
    double cmin = std::min(std::cos(lo), std::cos(hi));
    double cmax = std::max(std::cos(lo), std::cos(hi));
    for (double x = std::ceil(lo / std::numbers::pi) * std::numbers::pi; x <= hi; x += std::numbers::pi) {
        cmin = std::min(cmin, std::cos(x));
        cmax = std::max(cmax, std::cos(x));
    }
    return {cmin, cmax};
}

} // namespace

double deg_to_rad(double deg) {
    return deg * std::numbers::pi / 180.0;
}

std::vector<UserGeometry> place_typeS_users(std::size_t n_users, double varsigma, double angle_spread,
                                            std::size_t num_paths) {
    if (n_users < 1) {
        throw ValidationError("place_typeS_users: N must be at least 1");
    }
    std::vector<UserGeometry> out(n_users);
    for (std::size_t n = 0; n < n_users; ++n) {
        double aoa = std::fmod(varsigma + kTwoPi * static_cast<double>(n) / static_cast<double>(n_users), kTwoPi);
        if (aoa < 0.0) {
            aoa += kTwoPi;
        }
        out[n] = UserGeometry{aoa, angle_spread, num_paths, 0.5};
    }
    return out;
}

std::vector<UserGeometry> place_typeC_users(std::size_t k_users, Rng& rng, double angle_spread,
                                            std::size_t num_paths) {
    std::uniform_real_distribution<double> aoa(0.0, std::numbers::pi);
    std::vector<UserGeometry> out(k_users);
    for (auto& g : out) {
        g = UserGeometry{aoa(rng), angle_spread, num_paths, 0.5};
    }
    return out;
}

Scenario make_scenario(const ScenarioParams& p) {
    Scenario s;
    s.m = p.m;
    s.k = p.k;
    s.n = p.n;
    s.pilot.t_pilot = p.t_pilot;
    s.pilot.p_u = db_to_linear(p.p_u_db);
    s.p_d = db_to_linear(p.p_d_db);
    s.rho = db_to_linear(p.rho_db.value_or(p.p_d_db));
    s.seed = p.seed;
    s.mc_trials = p.trials;
    const double spread = deg_to_rad(p.angle_spread_deg);
    Rng placement = make_rng(p.seed, Stream::TypeCPlacement, 0);
    s.type_c = place_typeC_users(p.k, placement, spread, p.l_paths);
    if (p.n > 0) {
        s.type_s = place_typeS_users(p.n, deg_to_rad(p.varsigma_deg), spread, p.l_paths);
    }
    return s;
}

std::vector<Diagnostic> validate(const Scenario& s) {
    std::vector<Diagnostic> out;
    auto error = [&](std::string code, std::string msg) {
        out.push_back({Diagnostic::Severity::Error, std::move(code), std::move(msg)});
    };
    auto warn = [&](std::string code, std::string msg) {
        out.push_back({Diagnostic::Severity::Warning, std::move(code), std::move(msg)});
    };

    if (s.m < 1) {
        error("antennas", "M must be at least 1");
    }
    if (s.m < s.k + s.n) {
        error("antennas", fmt::format("M = {} is smaller than K + N = {}", s.m, s.k + s.n));
    } else if (s.m < 4 * (s.k + s.n)) {
        warn("hardening", fmt::format("M = {} is below 4(K + N) = {}; the channel hardening assumption is weak",
                                      s.m, 4 * (s.k + s.n)));
    }
    for (const auto& [name, value] : {std::pair{"p_d", s.p_d}, std::pair{"rho", s.rho}, std::pair{"p_u", s.pilot.p_u}}) {
        if (!(value > 0.0) || !std::isfinite(value)) {
            error("power", fmt::format("{} must be positive and finite, got {}", name, value));
        }
    }
    if (s.pilot.t_pilot < 1) {
        error("pilot", "t_pilot must be at least 1");
    } else if (s.pilot.t_pilot >= 6) {
        error("overhead", fmt::format("t_pilot = {} leaves no OFDM symbol for downlink data (t_pilot <= 5 required)",
                                      s.pilot.t_pilot));
    } else if (s.pilot.tau() < s.k) {
        error("pilot", fmt::format("tau = 14 * t_pilot = {} orthogonal pilots cannot serve K = {} type-C users",
                                   s.pilot.tau(), s.k));
    }
    if (s.mc_trials < 1) {
        error("trials", "trials must be at least 1");
    }
    if (s.type_c.size() != s.k) {
        error("geometry", fmt::format("{} type-C geometries for K = {}", s.type_c.size(), s.k));
    }
    if (s.type_s.size() != s.n) {
        error("geometry", fmt::format("{} type-S geometries for N = {}", s.type_s.size(), s.n));
    }
    for (const auto* group : {&s.type_c, &s.type_s}) {
        for (const UserGeometry& g : *group) {
            try {
                g.validate();
            } catch (const ValidationError& e) {
                error("geometry", e.what());
            }
        }
    }
    if (has_errors(out)) {
        return out;
    }

    // Expected r_1 from the asymptotic rank bound of each type-S covariance.
    double r1 = 0.0;
    for (const UserGeometry& g : s.type_s) {
        const auto [lo, hi] = cos_interval(g);
        const double bound = (hi - lo) * g.antenna_spacing_ratio * static_cast<double>(s.m);
        r1 += std::min(static_cast<double>(g.num_paths), std::ceil(bound));
    }
    r1 = std::min(r1, static_cast<double>(s.m));
    if (s.n > 0 && static_cast<double>(s.m) - r1 < static_cast<double>(s.k)) {
        warn("ezf_dimension",
             fmt::format("expected rank of the type-S covariances is about {:.0f}, leaving M - r_1 = {:.0f} < K = {}; "
                         "eZF/eMRT will likely be infeasible without low-rank approximation",
                         r1, static_cast<double>(s.m) - r1, s.k));
    }

    // A ULA sees cos(theta) only, so theta and 2 pi - theta are the same direction.
    for (std::size_t i = 0; i < s.type_s.size(); ++i) {
        for (std::size_t j = i + 1; j < s.type_s.size(); ++j) {
            const auto [lo_i, hi_i] = cos_interval(s.type_s[i]);
            const auto [lo_j, hi_j] = cos_interval(s.type_s[j]);
            if (lo_i <= hi_j && lo_j <= hi_i) {
                warn("aoa_alias",
                     fmt::format("type-S users {} and {} (mean AOA {:.1f} and {:.1f} deg) overlap in cos(theta) "
                                 "and are indistinguishable to a linear array",
                                 i, j, s.type_s[i].mean_aoa * 180.0 / std::numbers::pi,
                                 s.type_s[j].mean_aoa * 180.0 / std::numbers::pi));
            }
        }
    }
    return out;
}

bool has_errors(const std::vector<Diagnostic>& diags) {
    return std::any_of(diags.begin(), diags.end(),
                       [](const Diagnostic& d) { return d.severity == Diagnostic::Severity::Error; });
}

Realization realize(const Scenario& s) {
    Realization r;
    r.phi_c.reserve(s.type_c.size());
    r.phi_s.reserve(s.type_s.size());
    for (std::size_t k = 0; k < s.type_c.size(); ++k) {
        Rng rng = make_rng(s.seed, Stream::TypeCCovariance, k);
        r.phi_c.push_back(synth_covariance(s.type_c[k], s.m, rng));
    }
    for (std::size_t n = 0; n < s.type_s.size(); ++n) {
        Rng rng = make_rng(s.seed, Stream::TypeSCovariance, n);
        r.phi_s.push_back(synth_covariance(s.type_s[n], s.m, rng));
    }
    return r;
}

// ---- key = value files -----------------------------------------------------

const KvEntry* KvFile::find(std::string_view key) const {
    for (const KvEntry& e : entries) {
        if (e.key == key) {
            return &e;
        }
    }
    return nullptr;
}

KvFile parse_kv(std::string_view text, std::string source) {
    KvFile f;
    f.source = std::move(source);
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;

        const std::string_view line = trim(strip_comment(raw));
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ValidationError(fmt::format("{}:{}: expected `key = value`, got `{}`", f.source, line_no, line));
        }
        const std::string_view key = trim(line.substr(0, eq));
        const std::string_view value = trim(line.substr(eq + 1));
        if (!valid_key(key)) {
            throw ValidationError(fmt::format("{}:{}: invalid key `{}`", f.source, line_no, key));
        }
        if (value.empty()) {
            throw ValidationError(fmt::format("{}:{}: {}: missing value", f.source, line_no, key));
        }
        if (const KvEntry* prev = f.find(key)) {
            throw ValidationError(
                fmt::format("{}:{}: duplicate key `{}` (first set on line {})", f.source, line_no, key, prev->line));
        }
        f.entries.push_back({std::string(key), std::string(value), line_no});
    }
    return f;
}

KvFile read_kv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(fmt::format("cannot open `{}`", path));
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) {
        throw IoError(fmt::format("error reading `{}`", path));
    }
    return parse_kv(buf.str(), path);
}

double kv_double(const KvFile& f, const KvEntry& e) {
    const std::string& v = e.value;
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out)) {
        fail_at(f, e, fmt::format("expected a finite number, got `{}`", v));
    }
    return out;
}

std::int64_t kv_int(const KvFile& f, const KvEntry& e) {
    const std::string& v = e.value;
    std::int64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        fail_at(f, e, fmt::format("expected an integer, got `{}`", v));
    }
    return out;
}

std::uint64_t kv_uint(const KvFile& f, const KvEntry& e) {
    const std::string& v = e.value;
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        fail_at(f, e, fmt::format("expected a non-negative integer, got `{}`", v));
    }
    return out;
}

std::string kv_string(const KvFile& f, const KvEntry& e) {
    const std::string& v = e.value;
    if (v.size() < 2 || v.front() != '"' || v.back() != '"' ||
        v.find('"', 1) != v.size() - 1) {
        fail_at(f, e, fmt::format("expected a quoted string, got `{}`", v));
    }
    return v.substr(1, v.size() - 2);
}

std::vector<std::string> kv_list(const KvFile& f, const KvEntry& e) {
    const std::string& v = e.value;
    if (v.size() < 2 || v.front() != '[' || v.back() != ']') {
        fail_at(f, e, fmt::format("expected a list `[a, b, ...]`, got `{}`", v));
    }
    std::vector<std::string> out;
    const std::string_view body = trim(std::string_view(v).substr(1, v.size() - 2));
    if (body.empty()) {
        return out;
    }
    std::size_t pos = 0;
    while (pos <= body.size()) {
        const auto comma = body.find(',', pos);
        std::string_view item = trim(body.substr(pos, comma == std::string_view::npos ? std::string_view::npos
                                                                                         : comma - pos));
        pos = comma == std::string_view::npos ? body.size() + 1 : comma + 1;
        if (item.size() >= 2 && item.front() == '"' && item.back() == '"') {
            item = item.substr(1, item.size() - 2);
        }
        if (item.empty()) {
            fail_at(f, e, "empty list item");
        }
        out.emplace_back(item);
    }
    return out;
}

const std::vector<std::string_view>& scenario_keys() {
    static const std::vector<std::string_view> keys{"m",      "k",     "n",       "t_pilot",          "p_u_db",
                                                    "p_d_db", "rho_db", "seed",   "trials",           "l_paths",
                                                    "angle_spread_deg", "varsigma_deg"};
    return keys;
}

ScenarioParams scenario_from_kv(const KvFile& f, const std::vector<std::string_view>& extra_keys) {
    const auto& keys = scenario_keys();
    for (const KvEntry& e : f.entries) {
        const bool known = std::find(keys.begin(), keys.end(), e.key) != keys.end() ||
                           std::find(extra_keys.begin(), extra_keys.end(), e.key) != extra_keys.end();
        if (!known) {
            throw ValidationError(fmt::format("{}:{}: unknown key `{}`", f.source, e.line, e.key));
        }
    }

    ScenarioParams p;
    auto size_key = [&](std::string_view key, std::size_t& dst, std::size_t min) {
        if (const KvEntry* e = f.find(key)) {
            const std::int64_t v = kv_int(f, *e);
            if (v < static_cast<std::int64_t>(min)) {
                fail_at(f, *e, fmt::format("must be at least {}, got {}", min, v));
            }
            dst = static_cast<std::size_t>(v);
        }
    };
    auto real_key = [&](std::string_view key, double& dst) {
        if (const KvEntry* e = f.find(key)) {
            dst = kv_double(f, *e);
        }
    };
    size_key("m", p.m, 1);
    size_key("k", p.k, 0);
    size_key("n", p.n, 0);
    size_key("t_pilot", p.t_pilot, 1);
    real_key("p_u_db", p.p_u_db);
    real_key("p_d_db", p.p_d_db);
    if (const KvEntry* e = f.find("rho_db")) {
        p.rho_db = kv_double(f, *e);
    }
    if (const KvEntry* e = f.find("seed")) {
        p.seed = kv_uint(f, *e);
    }
    size_key("trials", p.trials, 1);
    size_key("l_paths", p.l_paths, 1);
    real_key("angle_spread_deg", p.angle_spread_deg);
    if (const KvEntry* e = f.find("angle_spread_deg"); e && !(p.angle_spread_deg > 0.0)) {
        fail_at(f, *e, "must be positive");
    }
    real_key("varsigma_deg", p.varsigma_deg);
    return p;
}

ScenarioParams parse_scenario(std::string_view text, std::string source) {
    return scenario_from_kv(parse_kv(text, std::move(source)));
}

std::string emit_scenario(const ScenarioParams& p) {
    std::string out;
    auto line = [&](std::string_view key, const auto& value) { out += fmt::format("{} = {}\n", key, value); };
    line("m", p.m);
    line("k", p.k);
    line("n", p.n);
    line("t_pilot", p.t_pilot);
    line("p_u_db", p.p_u_db);
    line("p_d_db", p.p_d_db);
    if (p.rho_db) {
        line("rho_db", *p.rho_db);
    }
    line("seed", p.seed);
    line("trials", p.trials);
    line("l_paths", p.l_paths);
    line("angle_spread_deg", p.angle_spread_deg);
    line("varsigma_deg", p.varsigma_deg);
    return out;
}

} // namespace mixcsi
