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

// hqdl: experiment harness. Exit status 0 on success, 1 on invalid
// configuration or arguments, 2 on a runtime failure (including a failed
// gradient check).

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "config.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

} // namespace

int main(int argc, char **argv) {
    using namespace hqdl::cli;

    CLI::App app{"Hybrid quantum-classical deep learning resource experiments"};
    app.require_subcommand(1);

    std::string config, out, format = "csv", noise;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    const auto add_common = [&](CLI::App *sub) {
        sub->add_option("--config", config, "YAML or JSON experiment file")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "single seed, replaces the config's seed grid");
        sub->add_option("--noise", noise, "noise mode")->check(CLI::IsMember({"exact", "bounded", "stochastic"}));
        sub->add_option("--jobs", jobs, "grid points run concurrently")->check(CLI::PositiveNumber);
        sub->add_option("--out", out, "output file (default: standard output)");
        sub->add_option("--format", format, "output format")->check(CLI::IsMember({"csv", "json"}));
    };
    const std::vector<std::pair<std::string, std::string>> commands{
        {"dcd-sweep", "Chebyshev transfer over (d, r, delta, seed)"},
        {"tomo-sweep", "l-infinity tomography over (d, eps, seed)"},
        {"block", "residual or transformer block fidelity over (noise, precision, seed)"},
        {"gradcheck", "linear-layer backward pass against central differences"},
        {"qram-fit", "fit I = kappa n(n+k) + c0 and extrapolate to n = 30"},
        {"overhead-report", "closed-form T-depth laws against the ledger"},
    };
    for (const auto &[name, help] : commands) {
        add_common(app.add_subcommand(name, help));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInvalid;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    const CLI::App *sub = app.get_subcommands().front();
    Overrides flags;
    if (sub->count("--seed")) flags.seed = seed;
    if (sub->count("--noise")) flags.noise = hqdl::parse_noise_mode(noise);
    if (sub->count("--jobs")) flags.jobs = jobs;
    if (sub->count("--out")) flags.out = out;

    Experiment experiment;
    try {
        experiment = load_experiment(command, config, flags);
    } catch (const std::exception &e) {
        std::cerr << "hqdl " << command << ": " << e.what() << '\n';
        return kInvalid;
    }

    try {
        const hqdl::experiments::Table table = run(experiment);
        const Format fmt = parse_format(format);
        if (experiment.out.empty()) {
            write_table(table, std::cout, fmt);
        } else {
            std::ofstream file(experiment.out, std::ios::trunc);
            write_table(table, file, fmt);
            if (!file) {
                std::cerr << "hqdl " << command << ": failed writing '" << experiment.out << "'\n";
                return kRuntime;
            }
        }
        if (failed(experiment, table)) {
            std::cerr << "hqdl " << command << ": gradient check failed\n";
            return kRuntime;
        }
    } catch (const std::exception &e) {
        std::cerr << "hqdl " << command << ": " << e.what() << '\n';
        return kRuntime;
    }
    return kOk;
}
