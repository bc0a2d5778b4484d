// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The mixcsi authors

#include "mixcsi/errors.hpp"
#include "mixcsi/experiment.hpp"

#include <doctest.h>

#include <filesystem>
#include <sstream>
#include <string>

using namespace mixcsi;
namespace fs = std::filesystem;

namespace {

SweepSpec parse_sweep(const std::string& text) {
    return sweep_from_kv(parse_kv(text, "sweep.toml"));
}

const char* kSmallSweep = R"(name = "small"
m = 16
k = 2
n = 1
trials = 60
axis = "p_d_db"
values = [0, 10]
methods = ["SBM", "eMRT", "MRT"]
outputs = ["MC", "ClosedForm"]
)";

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("mixcsi_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("sweep files") {
    SUBCASE("parse") {
        const SweepSpec s = parse_sweep(kSmallSweep);
        CHECK(s.name == "small");
        CHECK(s.axis == Axis::p_d_db);
        CHECK(s.values == std::vector<double>{0.0, 10.0});
        CHECK(s.methods == std::vector<Method>{Method::SBM, Method::eMRT, Method::MRT});
        CHECK(s.outputs == std::vector<RateSource>{RateSource::MonteCarlo, RateSource::ClosedForm});
        CHECK(s.base.m == 16);
        CHECK(s.conventional == ConventionalMode::AllUsers);
    }
    SUBCASE("empty methods list") {
        CHECK_THROWS_AS(parse_sweep("axis = \"m\"\nvalues = [32]\nmethods = []\n"), ValidationError);
    }
    SUBCASE("values must be strictly increasing") {
        CHECK_THROWS_AS(parse_sweep("axis = \"m\"\nvalues = [64, 32]\nmethods = [\"SBM\"]\n"), ValidationError);
        CHECK_THROWS_AS(parse_sweep("axis = \"m\"\nvalues = []\nmethods = [\"SBM\"]\n"), ValidationError);
    }
    SUBCASE("integer axes need integers") {
        CHECK_THROWS_AS(parse_sweep("axis = \"k\"\nvalues = [1.5]\nmethods = [\"SBM\"]\n"), ValidationError);
    }
    SUBCASE("closed forms need SBM") {
        CHECK_THROWS_AS(parse_sweep("axis = \"m\"\nvalues = [32]\nmethods = [\"eZF\"]\noutputs = [\"ClosedForm\"]\n"),
                        ValidationError);
    }
    SUBCASE("unknown names") {
        CHECK_THROWS_AS(parse_sweep("axis = \"q\"\nvalues = [1]\nmethods = [\"SBM\"]\n"), ValidationError);
        CHECK_THROWS_AS(parse_sweep("axis = \"m\"\nvalues = [32]\nmethods = [\"MMSE\"]\n"), ValidationError);
        CHECK_THROWS_AS(parse_sweep("axis = \"m\"\nvalues = [32]\nmethods = [\"SBM\"]\nconventional = \"some\"\n"),
                        ValidationError);
        CHECK_THROWS_AS(parse_sweep("axis = \"m\"\nvalues = [32]\nmethods = [\"SBM\"]\nfoo = 1\n"), ValidationError);
    }
    SUBCASE("apply_axis") {
        const ScenarioParams base;
        CHECK(apply_axis(base, Axis::m, 64.0).m == 64);
        CHECK(apply_axis(base, Axis::p_d_db, -5.0).p_d_db == -5.0);
        CHECK(apply_axis(base, Axis::t_pilot, 3.0).t_pilot == 3);
        CHECK(apply_axis(base, Axis::n, 0.0).n == 0);
    }
}

TEST_CASE("run_sweep") {
    const SweepSpec spec = parse_sweep(kSmallSweep);
    const SweepResult a = run_sweep(spec, {1});

    SUBCASE("rows: one per user class, closed form only for SBM, sorted") {
        CHECK(a.failures.empty());
        // per value: SBM MC (2) + SBM ClosedForm (2) + eMRT MC (2) + MRT MC (2)
        CHECK(a.rows.size() == 16);
        for (std::size_t i = 1; i < a.rows.size(); ++i) {
            CHECK(a.rows[i - 1].axis_value <= a.rows[i].axis_value);
        }
        for (const CsvRow& r : a.rows) {
            CHECK((r.source == RateSource::MonteCarlo || r.method == Method::SBM));
            CHECK(r.mean_rate >= 0.0);
        }
    }
    SUBCASE("job count does not change the CSV") {
        const SweepResult b = run_sweep(spec, {3});
        CHECK(format_csv(a.rows) == format_csv(b.rows));
    }
    SUBCASE("seed and trial overrides") {
        SweepOptions opts;
        opts.trials = 30;
        const SweepResult c = run_sweep(spec, opts);
        CHECK(format_csv(c.rows) != format_csv(a.rows));
        opts.seed = 99;
        const SweepResult d = run_sweep(spec, opts);
        CHECK(format_csv(d.rows) != format_csv(c.rows));
    }
    SUBCASE("CSV text round-trips") {
        const std::string text = format_csv(a.rows);
        CHECK(text.rfind(std::string(kCsvHeader) + "\n", 0) == 0);
        CHECK(format_csv(parse_csv(text)) == text);
        CHECK_THROWS_AS((void)parse_csv("a,b\n"), ValidationError);
    }
}

TEST_CASE("partial failures are recorded and the sweep continues") {
    const SweepSpec spec = parse_sweep(R"(name = "partial"
k = 2
n = 1
trials = 20
axis = "m"
values = [2, 16]
methods = ["SBM"]
)");
    const SweepResult r = run_sweep(spec);
    REQUIRE(r.failures.size() == 1);
    CHECK(r.failures[0].axis_value == 2.0);
    CHECK(r.failures[0].kind == "validation");
    CHECK(r.rows.size() == 2);
    const std::string text = format_failures(r.failures);
    CHECK(text.rfind("axis_value,method,source,kind,message\n", 0) == 0);
}

TEST_CASE("output files") {
    const SweepSpec spec = parse_sweep(kSmallSweep);
    const SweepResult result = run_sweep(spec);
    const fs::path dir = scratch_dir("plotdata");
    const fs::path csv = write_sweep(spec, result, dir);
    CHECK(csv == dir / "small.csv");
    CHECK(fs::exists(dir / "small.failures.csv"));
    CHECK(read_text_file(csv) == format_csv(result.rows));

    const auto files = emit_plotdata(csv, dir / "plot");
    // SBM MC/ClosedForm, eMRT MC, MRT MC, each with both classes
    CHECK(files.size() == 8);
    CHECK(fs::exists(dir / "plot" / "small.SBM.typeS.ClosedForm.dat"));
    for (const fs::path& f : files) {
        std::istringstream in(read_text_file(f));
        std::string line;
        std::size_t points = 0;
        while (std::getline(in, line)) {
            std::istringstream cols(line);
            std::string x, y, extra;
            cols >> x >> y;
            CHECK_FALSE(x.empty());
            CHECK_FALSE(y.empty());
            CHECK_FALSE(static_cast<bool>(cols >> extra));
            ++points;
        }
        CHECK(points == spec.values.size());
    }
    CHECK_THROWS_AS((void)emit_plotdata(dir / "missing.csv", dir), IoError);
    fs::remove_all(dir);
}

} // TEST_SUITE
