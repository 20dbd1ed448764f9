/*
 * Copyright 2026 The uso Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line front end over the C interface.
//
//   uso run <config.json> [--mode M] [--seed N] [--iters T] [--init I]
//           [--kappa K] [--advisor-endpoint URL] [--mock-advisor POLICY] [--out DIR]
//   uso validate-ks <summary.ks> <spec.json>
//   uso bench <config_dir> [--seeds 0,1,2] [--out DIR]
//   uso bench --preset transfer [--seeds ...] [--out DIR]
//
// Exit codes: 0 success, 1 validation findings, 2 usage/config/parse error,
// 3 runtime failure.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uso/uso.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFindings = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

void report(const char* what) { std::cerr << "uso: " << what << ": " << uso_last_error() << '\n'; }

struct RunArgs {
    std::string config;
    std::vector<std::pair<std::string, std::optional<std::string>>> overrides = {
        {"mode", {}}, {"seed", {}},  {"iters", {}},        {"init", {}},
        {"kappa", {}}, {"advisor-endpoint", {}}, {"mock-advisor", {}}, {"out", {}}};
};

int cmd_run(RunArgs& a) {
    uso_experiment* exp = nullptr;
    if (uso_experiment_load(a.config.c_str(), &exp) != USO_OK) {
        report("config");
        return kExitConfig;
    }
    for (const auto& [key, value] : a.overrides) {
        if (!value) continue;
        if (uso_experiment_override(exp, key.c_str(), value->c_str()) != USO_OK) {
            report("override");
            uso_experiment_free(exp);
            return kExitConfig;
        }
    }
    uso_result* res = nullptr;
    const uso_status st = uso_experiment_run(exp, &res);
    uso_experiment_free(exp);
    if (st != USO_OK) {
        report("run failed");
        return st == USO_E_CONFIG ? kExitConfig : kExitRuntime;
    }
    std::cout << "best FOM: " << uso_result_best_fom(res) << '\n';
    std::cout << "evaluations: " << uso_result_evaluations(res) << '\n';
    std::cout << "advisor calls: " << uso_result_transcripts(res) << '\n';
    const std::string manifest = uso_result_manifest_path(res);
    if (!manifest.empty()) std::cout << "manifest: " << manifest << '\n';
    uso_result_free(res);
    return kExitOk;
}

int cmd_validate(const std::string& ks, const std::string& spec_path) {
    uso_summary* summary = nullptr;
    if (uso_summary_load(ks.c_str(), &summary) != USO_OK) {
        const size_t line = uso_last_error_line();
        if (line > 0) {
            std::cerr << ks << ":" << line << ": " << uso_last_error() << '\n';
        } else {
            report(ks.c_str());
        }
        return kExitConfig;
    }
    uso_spec* spec = nullptr;
    if (uso_spec_load(spec_path.c_str(), &spec) != USO_OK) {
        report(spec_path.c_str());
        uso_summary_free(summary);
        return kExitConfig;
    }
    uso_report* rep = nullptr;
    const uso_status st = uso_summary_validate(summary, spec, &rep);
    uso_summary_free(summary);
    uso_spec_free(spec);
    if (st != USO_OK) {
        report("validate");
        return kExitRuntime;
    }
    const size_t n = uso_report_size(rep);
    for (size_t i = 0; i < n; ++i) std::cout << uso_report_line(rep, i) << '\n';
    if (n == 0) std::cout << "ok: no findings\n";
    uso_report_free(rep);
    return n == 0 ? kExitOk : kExitFindings;
}

int cmd_bench(const std::string& dir, const std::string& preset, const std::vector<std::uint64_t>& seeds,
              const std::string& out) {
    if (dir.empty() == preset.empty()) {
        std::cerr << "uso: bench needs a config directory or --preset, not both\n";
        return kExitConfig;
    }
    uso_bench* b = nullptr;
    const uso_status st =
        preset.empty() ? uso_bench_run_dir(dir.c_str(), seeds.data(), seeds.size(), out.c_str(), &b)
                       : uso_bench_run_preset(preset.c_str(), seeds.data(), seeds.size(), out.c_str(), &b);
    if (st != USO_OK) {
        report("bench");
        return st == USO_E_CONFIG || st == USO_E_PARSE || st == USO_E_IO ? kExitConfig : kExitRuntime;
    }
    std::cout << uso_bench_table(b);
    if (!out.empty()) std::cout << "report: " << out << "/report.csv\n";
    const bool all_failed = uso_bench_runs(b) > 0 && uso_bench_failures(b) == uso_bench_runs(b);
    if (uso_bench_failures(b) > 0)
        std::cerr << "uso: " << uso_bench_failures(b) << " of " << uso_bench_runs(b) << " runs failed\n";
    uso_bench_free(b);
    return all_failed ? kExitRuntime : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"uso: surrogate optimization with knowledge reuse"};
    app.require_subcommand(1);
    app.set_version_flag("--version", uso_version());

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Run one optimization experiment");
    run_cmd->add_option("config", run.config, "Experiment config (JSON)")->required();
    for (auto& [key, value] : run.overrides) run_cmd->add_option("--" + key, value);

    std::string ks, spec;
    auto* val_cmd = app.add_subcommand("validate-ks", "Check a KS/1 summary against a circuit spec");
    val_cmd->add_option("summary", ks, "KS/1 file")->required();
    val_cmd->add_option("spec", spec, "Circuit spec (JSON)")->required();

    std::string bench_dir, preset, out = "bench-results";
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    auto* bench_cmd = app.add_subcommand("bench", "Run a config x seed grid");
    bench_cmd->add_option("config_dir", bench_dir, "Directory of *.json experiment configs");
    bench_cmd->add_option("--preset", preset, "Built-in grid: transfer");
    bench_cmd->add_option("--seeds", seeds, "Comma separated seeds")->delimiter(',');
    bench_cmd->add_option("--out", out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    if (*run_cmd) return cmd_run(run);
    if (*val_cmd) return cmd_validate(ks, spec);
    return cmd_bench(bench_dir, preset, seeds, out);
}
