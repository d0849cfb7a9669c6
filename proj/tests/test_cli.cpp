// Copyright 2026 The hqdl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include <catch_amalgamated.hpp>

#include "config.hpp"

using namespace hqdl;
using namespace hqdl::experiments;
using hqdl::cli::ConfigError;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::StartsWith;
using Catch::Matchers::WithinRel;

namespace {

cli::Experiment parse(const std::string &command, const std::string &yaml, cli::Overrides flags = {}) {
    return cli::parse_experiment(command, yaml, "cfg.yaml", flags);
}

std::filesystem::path scratch_dir() {
    const auto dir = std::filesystem::temp_directory_path() / "hqdl_test_cli";
    std::filesystem::create_directories(dir);
    return dir;
}

std::filesystem::path write_file(const std::string &name, const std::string &text) {
    const auto p = scratch_dir() / name;
    std::ofstream(p) << text;
    return p;
}

std::string slurp(const std::filesystem::path &p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Runs the built tool; returns its exit status.
int tool(const std::string &args) {
    const std::string cmd = std::string(HQDL_TOOL) + " " + args + " 2>" + (scratch_dir() / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

double mean_column(const Table &t, const std::string &col, const std::string &key, const std::string &match) {
    double s = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        if (t.rows[i][t.column(key)] == match) {
            s += t.value(i, col);
            ++n;
        }
    }
    return s / n;
}

} // namespace

TEST_CASE("config errors carry line and column", "[cli]") {
    CHECK_THROWS_WITH(parse("tomo-sweep", "dims: [64]\nepsilons: [1.0]\n"),
                      StartsWith("cfg.yaml:2:11:") && ContainsSubstring("(0, 1)"));
    CHECK_THROWS_WITH(parse("dcd-sweep", "dims: [64]\nrank: [3]\n"),
                      StartsWith("cfg.yaml:2:1:") && ContainsSubstring("unknown key 'rank'"));
    CHECK_THROWS_WITH(parse("dcd-sweep", "dims: [64]\n  ranks: 3\n"), StartsWith("cfg.yaml:2:"));
    CHECK_THROWS_WITH(parse("dcd-sweep", "ranks: [4, -1]\n"), StartsWith("cfg.yaml:1:") &&
                                                               ContainsSubstring("non-negative integer"));
    CHECK_THROWS_WITH(parse("dcd-sweep", "seeds: []\n"), ContainsSubstring("must not be empty"));
    CHECK_THROWS_WITH(parse("dcd-sweep", "baseline:\n  model: vgg\n"),
                      StartsWith("cfg.yaml:2:10:") && ContainsSubstring("unknown model"));
    CHECK_THROWS_WITH(parse("block", "noise: [exact, loud]\n"), StartsWith("cfg.yaml:1:16:"));
    CHECK_THROWS_WITH(parse("block", "command: gradcheck\n"), ContainsSubstring("not 'block'"));
    CHECK_THROWS_AS(parse("fly", ""), ConfigError);
    CHECK_THROWS_AS(parse("gradcheck", "m: 3\nn: 4\nidentity: true\n"), ConfigError);
    CHECK_THROWS_AS(parse("gradcheck", "corrupt: [9, 0]\n"), ConfigError);
    CHECK_THROWS_AS(parse("dcd-sweep", "out: /nonexistent-dir/x.csv\n"), ConfigError);
}

TEST_CASE("flags override the config file", "[cli]") {
    cli::Overrides f;
    f.seed = 9;
    f.noise = NoiseMode::Exact;
    f.jobs = 3;
    const auto e = parse("dcd-sweep", "seeds: [1, 2]\nnoise: stochastic\njobs: 2\n", f);
    const auto &s = std::get<DcdSweepSpec>(e.spec);
    CHECK(s.seeds == std::vector<std::uint64_t>{9});
    CHECK(s.noise == NoiseMode::Exact);
    CHECK(s.jobs == 3);

    const auto b = parse("block", "noise: [bounded, stochastic]\nprecisions: 0.01\n");
    CHECK(std::get<BlockSpec>(b.spec).noises.size() == 2);
    CHECK(std::get<BlockSpec>(b.spec).precisions == std::vector<double>{0.01});
}

TEST_CASE("baseline token counts", "[cli]") {
    CHECK(Baseline{BaselineModel::Resnet, 32, 0}.N() == 64);
    CHECK(Baseline{BaselineModel::Transformer, 32, 0}.N() == 4);
    CHECK(Baseline{BaselineModel::Direct, 0, 7}.N() == 7);
    CHECK_THROWS_AS(Baseline({BaselineModel::Transformer, 24, 0}).N(), Error);

    auto e = parse("dcd-sweep", "dims: 16\nranks: 4\nbaseline: {model: transformer, input_dim: 32}\n");
    const Table t = run(e);
    REQUIRE(t.rows.size() == 1);
    CHECK(t.value(0, "Q_baseline") == 4e8);
}

TEST_CASE("dcd-sweep rows", "[cli]") {
    auto e = parse("dcd-sweep", "dims: [32]\nranks: [5]\ndeltas: [0.02]\nnoise: exact\n");
    const Table t = run(e);
    REQUIRE(t.rows.size() == 1);
    CHECK(t.columns == dcd_sweep_columns());
    const auto basis = build_basis(32);
    const auto psi = sweep_state(32, 2.0, 0, basis);
    CHECK(std::abs(t.value(0, "l2_err") - truncation_tail(psi.amplitudes, 5, basis)) <= 1e-12);
    CHECK(t.rows[0][t.column("accuracy")].empty());
    CHECK(t.value(0, "Q") == t.value(0, "tdepth") * t.value(0, "shots"));

    auto big = parse("dcd-sweep", "dims: [8, 16]\nranks: [4, 12]\n");
    CHECK(run(big).rows.size() == 3); // r = 12 > d = 8 is omitted

    auto task = parse("dcd-sweep", "dims: 16\nranks: 2\ntask: {samples: 40}\n");
    const double acc = run(task).value(0, "accuracy");
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
}

TEST_CASE("tomo-sweep rows", "[cli]") {
    auto e = parse("tomo-sweep", "dims: [64, 128]\nepsilons: [0.1, 0.05]\nseeds: 4\n");
    const Table t = run(e);
    REQUIRE(t.rows.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        const double d = t.value(i, "d"), eps = t.value(i, "eps");
        const double per_pass = std::ceil(std::log(d) / (eps * eps));
        CHECK(t.value(i, "shots_per_pass") == per_pass);
        CHECK(t.value(i, "shots") == 2 * per_pass);
    }
    CHECK_THROWS_AS(parse("tomo-sweep", "epsilons: [1]\n"), ConfigError);

    auto exact = parse("tomo-sweep", "dims: [64, 128]\nepsilons: [0.1, 0.05]\nseeds: [0, 1]\nnoise: exact\n");
    const Table te = run(exact);
    for (std::size_t i = 0; i < te.rows.size(); ++i) {
        CHECK(te.value(i, "l2_err") <= 1e-9);
    }
}

TEST_CASE("block rows", "[cli]") {
    const Table exact = run(parse("block", "noise: exact\nprecisions: [0.02]\n"));
    CHECK(exact.value(0, "infidelity") <= 1e-10);
    CHECK(exact.value(0, "l2_diff") <= 1e-5);

    const Table tr = run(parse("block", "block: transformer\nnoise: exact\nprecisions: 0.01\n"));
    CHECK(tr.rows[0][0] == "transformer");
    CHECK(tr.value(0, "infidelity") <= 1e-10);

    const Table t = run(parse("block", "precisions: [0.02, 0.002]\nseeds: [0, 1, 2, 3]\njobs: 4\n"));
    REQUIRE(t.rows.size() == 8);
    const double coarse = mean_column(t, "infidelity", "precision", csv::num(0.02));
    const double fine = mean_column(t, "infidelity", "precision", csv::num(0.002));
    const double ratio = (coarse / fine) / 10.0;
    CHECK(ratio >= 5.0);
    CHECK(ratio <= 20.0);

    const auto good = write_file("kernel.csv", "0.5\n0.1\n-0.2\n0.3\n");
    const Table w = run(parse("block", "C: 2\nK: 1\nH: 3\nW: 3\nnoise: exact\nweights: " + good.string() + "\n"));
    CHECK(w.value(0, "infidelity") <= 1e-10);

    const auto bad = write_file("bad_kernel.csv", "0.5,1\n0.1\n");
    CHECK_THROWS_WITH(parse("block", "C: 2\nK: 1\nweights: " + bad.string() + "\n"), StartsWith("cfg.yaml:3:"));
    const auto shape = write_file("short_kernel.csv", "0.5\n0.1\n");
    CHECK_THROWS_AS(parse("block", "C: 2\nK: 1\nweights: " + shape.string() + "\n"), ConfigError);
}

TEST_CASE("gradcheck reports", "[cli]") {
    const Table id = run(parse("gradcheck", "m: 4\nn: 4\nidentity: true\n"));
    CHECK(all_pass(id));

    const Table seeded = run(parse("gradcheck", "seeds: [1, 2, 3]\n"));
    REQUIRE(seeded.rows.size() == 6);
    CHECK(all_pass(seeded));
    for (std::size_t i = 0; i < seeded.rows.size(); ++i) {
        CHECK(seeded.value(i, "max_err") <= 1e-5);
    }

    const Table noisy = run(parse("gradcheck", "noise: bounded\ndelta: 0.05\nseeds: [1, 2]\n"));
    CHECK(all_pass(noisy));

    const Table bad = run(parse("gradcheck", "corrupt: [2, 3]\n"));
    CHECK_FALSE(all_pass(bad));
    CHECK(bad.rows[0][bad.column("pass")] == "fail");
    CHECK(bad.rows[0][bad.column("worst")] == "dW[2,3]");
    CHECK(bad.rows[1][bad.column("pass")] == "pass");
}

TEST_CASE("qram-fit reports", "[cli]") {
    cli::Overrides exact;
    exact.noise = NoiseMode::Exact;
    const Table t = run(parse("qram-fit", "kappa: 5e-5\nc0: 0.001\n", exact));
    CHECK_THAT(t.value(0, "value"), WithinRel(5e-5, 1e-9));
    CHECK(std::abs(t.value(1, "value") - 0.001) <= 1e-12);
    CHECK(t.rows[5][0] == "fidelity_n30_k32");
    CHECK(t.value(5, "anchor") == 0.91);
    CHECK(t.value(6, "anchor") == 0.87);

    const Table noisy = run(parse("qram-fit", "noise_level: 0.01\nseed: 3\n"));
    CHECK_THAT(noisy.value(0, "value"), WithinRel(4.7e-5, 0.02));

    const auto data = write_file("qram.csv", "n,k,infidelity\n4,4,0.01\n4,4,0.011\n4,4,0.012\n");
    CHECK_THROWS_WITH(run(parse("qram-fit", "data: " + data.string() + "\n")), ContainsSubstring("DegenerateFit"));
    const auto ok = write_file("qram_ok.csv", "n,k,infidelity\n2,2,0.01\n3,2,0.02\n4,8,0.05\n");
    CHECK(run(parse("qram-fit", "data: " + ok.string() + "\n")).rows.size() == 5);
}

TEST_CASE("overhead-report rows", "[cli]") {
    const Table t = run(parse("overhead-report", "channels: [1, 2]\nkernels: [1, 3]\ndims: [8, 16]\ntoken_grid: [4, 8]\n"));
    CHECK(t.rows.size() == 4 + 2 + 2);
    CHECK(t.rows[0][0] == "resnet");
    CHECK(t.rows[4][0] == "mhsa");
    CHECK(t.value(1, "model") == 9.0);
}

TEST_CASE("rows re-run from their seed reproduce bit-exactly", "[cli][determinism]") {
    const std::string cfg = "dims: [32, 64]\nranks: [4]\ndeltas: [0.05]\nnoise: stochastic\nseeds: [5, 6, 7]\n";
    const Table all = run(parse("dcd-sweep", cfg + "jobs: 4\n"));
    cli::Overrides one;
    one.seed = 6;
    const Table single = run(parse("dcd-sweep", cfg, one));
    REQUIRE(single.rows.size() == 2);
    CHECK(single.rows[0] == all.rows[1]);
    CHECK(single.rows[1] == all.rows[4]);
    CHECK(run(parse("dcd-sweep", cfg)).rows == all.rows);

    const Table blocks = run(parse("block", "seeds: [1, 2]\njobs: 2\n"));
    cli::Overrides two;
    two.seed = 2;
    CHECK(run(parse("block", "", two)).rows[0] == blocks.rows[1]);
}

TEST_CASE("tool exit codes and output files", "[cli][invocation]") {
    const auto dir = scratch_dir();
    const auto out = dir / "sweep.csv";
    const auto cfg = write_file("sweep.yaml", "dims: [16]\nranks: [2, 4]\n");
    CHECK(tool("dcd-sweep --config " + cfg.string() + " --seed 3 --out " + out.string()) == 0);
    const std::string csv = slurp(out);
    CHECK_THAT(csv, StartsWith("d,r,delta,seed,l2_err,accuracy,tdepth,shots,queries,Q,Q_baseline\n"));
    CHECK_THAT(csv, ContainsSubstring("\n16,4,0.01,3,"));

    const auto json = dir / "sweep.json";
    CHECK(tool("tomo-sweep --noise exact --format json --out " + json.string()) == 0);
    CHECK_THAT(slurp(json), StartsWith("[") && ContainsSubstring("\"shots_per_pass\": 416"));

    const auto bad = write_file("bad.yaml", "epsilons: [1]\n");
    CHECK(tool("tomo-sweep --config " + bad.string()) == 1);
    CHECK_THAT(slurp(dir / "stderr.txt"), ContainsSubstring("bad.yaml:1:"));
    CHECK(tool("tomo-sweep --noise loud") == 1);
    CHECK(tool("nosuch") == 1);

    const auto weights = write_file("w.csv", "1,2\nx,4\n");
    const auto wcfg = write_file("wb.yaml", "weights: w.csv\n");
    CHECK(tool("block --config " + wcfg.string()) == 1);
    CHECK_THAT(slurp(dir / "stderr.txt"), ContainsSubstring("not a number"));

    CHECK(tool("gradcheck --out " + (dir / "g.csv").string()) == 0);
    const auto corrupt = write_file("gc.yaml", "corrupt: [0, 1]\n");
    CHECK(tool("gradcheck --config " + corrupt.string() + " --out " + (dir / "g.csv").string()) == 2);
    CHECK_THAT(slurp(dir / "g.csv"), ContainsSubstring("dW[0,1],fail"));

    CHECK(tool("qram-fit --noise exact --out " + (dir / "q.csv").string()) == 0);
    CHECK_THAT(slurp(dir / "q.csv"), ContainsSubstring("fidelity_n30_k64"));
}
