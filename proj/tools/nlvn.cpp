// Copyright 2026 The nlvn Authors
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

// Command-line front end for scenario files.
//
// Exit codes: 0 pass or informative, 1 fail, 2 usage or scenario error,
// 3 runtime error while running an experiment.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "nlvn/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

int run_command(const std::string &file, const std::string &out_dir, std::optional<std::uint64_t> seed,
                const std::string &format) {
    nlvn::Scenario scenario = nlvn::load_scenario(file);
    nlvn::ExperimentReport report = nlvn::run_scenario(scenario, seed);

    std::filesystem::path base = scenario.output;
    if (!out_dir.empty()) {
        base = std::filesystem::path(out_dir) / base.filename();
    }
    auto files = nlvn::emit_report(report, base);

    if (format == "json-summary") {
        std::cout << nlvn::summary_json(report, base.filename().string()).dump(2) << "\n";
    } else {
        std::cout << nlvn::format_table(report, files);
    }
    if (scenario.expected_verdict && *scenario.expected_verdict != report.verdict) {
        std::cerr << "warning: verdict " << nlvn::to_string(report.verdict) << " differs from expected_verdict "
                  << nlvn::to_string(*scenario.expected_verdict) << "\n";
    }
    return report.verdict == nlvn::Verdict::fail ? kExitFail : kExitOk;
}

int validate_command(const std::string &file, bool canonical) {
    nlvn::Scenario scenario = nlvn::load_scenario(file);
    if (canonical) {
        std::cout << nlvn::to_canonical_text(scenario);
    } else {
        std::cout << "ok " << file << " (" << nlvn::to_string(scenario.experiment) << ")\n";
    }
    return kExitOk;
}

int list_command() {
    for (nlvn::ExperimentId id : nlvn::kAllExperiments) {
        std::cout << nlvn::to_string(id) << "\t" << nlvn::describe(id) << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Nonlinear von Neumann dynamics: run and validate scenario files", "nlvn"};
    app.require_subcommand(1);

    std::string file;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::string format = "table";
    bool canonical = false;

    CLI::App *run = app.add_subcommand("run", "Run a scenario and write its report files");
    run->add_option("file", file, "Scenario TOML file")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out_dir, "Directory for report files (overrides the scenario's output directory)");
    run->add_option("--seed", seed, "Override the scenario seed");
    run->add_option("--format", format, "Standard output format")->check(CLI::IsMember({"table", "json-summary"}));

    CLI::App *validate = app.add_subcommand("validate", "Parse and check a scenario without running it");
    validate->add_option("file", file, "Scenario TOML file")->required()->check(CLI::ExistingFile);
    validate->add_flag("--canonical", canonical, "Print the scenario with every default filled in");

    CLI::App *list = app.add_subcommand("list-experiments", "List the available experiments");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (run->parsed()) {
            return run_command(file, out_dir, seed, format);
        }
        if (validate->parsed()) {
            return validate_command(file, canonical);
        }
        if (list->parsed()) {
            return list_command();
        }
    } catch (const nlvn::ScenarioError &e) {
        std::cerr << file << ": " << e.what() << "\n";
        return kExitUsage;
    } catch (const nlvn::ScenarioRunError &e) {
        std::cerr << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
