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

#include "uso/uso.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <limits>
#include <new>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "uso/acquisition.hpp"
#include "uso/config.hpp"
#include "uso/error.hpp"
#include "uso/evaluator.hpp"
#include "uso/knowledge.hpp"
#include "uso/orchestrator.hpp"
#include "uso/surrogate.hpp"

struct uso_summary {
    uso::KnowledgeSummary k;
};
struct uso_spec {
    uso::CircuitSpec s;
};
struct uso_report {
    std::vector<std::string> lines;
};
struct uso_experiment {
    uso::ExperimentConfig cfg;
};
struct uso_result {
    double best_fom;
    std::size_t evaluations;
    std::size_t transcripts;
    std::string manifest;
    std::string summary;
};
struct uso_bench {
    uso::BenchReport report;
    std::string table;
    std::string csv;
};
struct uso_gp {
    uso::GpModel model;
};

namespace {

thread_local std::string t_last_error;
thread_local std::size_t t_last_line = 0;

uso_status status_of(uso::ErrorKind k) {
    using uso::ErrorKind;
    switch (k) {
        case ErrorKind::InvalidArgument: return USO_E_INVALID_ARGUMENT;
        case ErrorKind::Syntax:
        case ErrorKind::DuplicateRecord:
        case ErrorKind::UnknownDirective: return USO_E_PARSE;
        case ErrorKind::Config: return USO_E_CONFIG;
        case ErrorKind::Io: return USO_E_IO;
        case ErrorKind::EmptyBuffer: return USO_E_EMPTY;
        case ErrorKind::NoParseableSuggestion:
        case ErrorKind::AdvisorUnavailable: return USO_E_ADVISOR;
        default: return USO_E_RUNTIME;
    }
}

uso_status fail(uso_status s, const std::string& msg, std::size_t line = 0) {
    t_last_error = msg;
    t_last_line = line;
    return s;
}

// Runs `f`, translating exceptions into status codes.
template <class F>
uso_status guard(F&& f) {
    try {
        f();
        return USO_OK;
    } catch (const uso::ParseError& e) {
        return fail(status_of(e.kind()), e.what(), e.line());
    } catch (const uso::Error& e) {
        return fail(status_of(e.kind()), e.what());
    } catch (const std::bad_alloc&) {
        return fail(USO_E_RUNTIME, "out of memory");
    } catch (const std::exception& e) {
        return fail(USO_E_RUNTIME, e.what());
    }
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

#define USO_REQUIRE(cond, what)                                             \
    do {                                                                    \
        if (!(cond)) return fail(USO_E_INVALID_ARGUMENT, what);             \
    } while (0)

std::vector<std::uint64_t> seed_list(const uint64_t* seeds, size_t n) {
    if (!seeds || n == 0) return {0, 1, 2, 3, 4};
    return {seeds, seeds + n};
}

uso_bench* make_bench(uso::BenchReport r) {
    auto* b = new uso_bench{std::move(r), {}, {}};
    b->table = b->report.to_table();
    b->csv = b->report.to_csv();
    return b;
}

}  // namespace

extern "C" {

const char* uso_version(void) { return "0.1.0"; }
const char* uso_last_error(void) { return t_last_error.c_str(); }
size_t uso_last_error_line(void) { return t_last_line; }

const char* uso_status_name(uso_status status) {
    switch (status) {
        case USO_OK: return "USO_OK";
        case USO_E_INVALID_ARGUMENT: return "USO_E_INVALID_ARGUMENT";
        case USO_E_PARSE: return "USO_E_PARSE";
        case USO_E_CONFIG: return "USO_E_CONFIG";
        case USO_E_RUNTIME: return "USO_E_RUNTIME";
        case USO_E_IO: return "USO_E_IO";
        case USO_E_EMPTY: return "USO_E_EMPTY";
        case USO_E_ADVISOR: return "USO_E_ADVISOR";
    }
    return "USO_E_UNKNOWN";
}

void uso_string_free(char* s) { std::free(s); }

// ---- summaries

uso_status uso_summary_parse(const char* text, size_t length, uso_summary** out) {
    USO_REQUIRE(text && out, "null argument");
    *out = nullptr;
    return guard([&] { *out = new uso_summary{uso::parse_summary(std::string_view(text, length))}; });
}

uso_status uso_summary_load(const char* path, uso_summary** out) {
    USO_REQUIRE(path && out, "null argument");
    *out = nullptr;
    return guard([&] { *out = new uso_summary{uso::load_summary(path)}; });
}

uso_status uso_summary_serialize(const uso_summary* summary, char** out) {
    USO_REQUIRE(summary && out, "null argument");
    *out = nullptr;
    return guard([&] { *out = dup_string(uso::serialize_summary(summary->k)); });
}

const char* uso_summary_circuit(const uso_summary* summary) {
    return summary ? summary->k.circuit_id().c_str() : nullptr;
}

size_t uso_summary_record_count(const uso_summary* summary) {
    return summary ? summary->k.record_count() : 0;
}

void uso_summary_free(uso_summary* summary) { delete summary; }

// ---- specs

uso_status uso_spec_load(const char* path, uso_spec** out) {
    USO_REQUIRE(path && out, "null argument");
    *out = nullptr;
    return guard([&] { *out = new uso_spec{uso::load_spec(path)}; });
}

uso_status uso_spec_builtin(const char* name, unsigned family_seed, uso_spec** out) {
    USO_REQUIRE(name && out, "null argument");
    *out = nullptr;
    return guard([&] { *out = new uso_spec{uso::builtin_circuit(name, family_seed)}; });
}

size_t uso_spec_dims(const uso_spec* spec) { return spec ? spec->s.dims() : 0; }
void uso_spec_free(uso_spec* spec) { delete spec; }

// ---- validation

uso_status uso_summary_validate(const uso_summary* summary, const uso_spec* spec, uso_report** out) {
    USO_REQUIRE(summary && spec && out, "null argument");
    *out = nullptr;
    return guard([&] { *out = new uso_report{uso::validate_summary(summary->k, spec->s).lines()}; });
}

size_t uso_report_size(const uso_report* report) { return report ? report->lines.size() : 0; }

const char* uso_report_line(const uso_report* report, size_t index) {
    if (!report || index >= report->lines.size()) return nullptr;
    return report->lines[index].c_str();
}

void uso_report_free(uso_report* report) { delete report; }

// ---- experiments

uso_status uso_experiment_load(const char* config_path, uso_experiment** out) {
    USO_REQUIRE(config_path && out, "null argument");
    *out = nullptr;
    return guard([&] { *out = new uso_experiment{uso::load_experiment_config(config_path)}; });
}

uso_status uso_experiment_override(uso_experiment* exp, const char* key, const char* value) {
    USO_REQUIRE(exp && key && value, "null argument");
    return guard([&] {
        uso::ExperimentConfig next = exp->cfg;
        uso::apply_override(next, key, value);
        next.validate();
        exp->cfg = std::move(next);
    });
}

uso_status uso_experiment_run(uso_experiment* exp, uso_result** out) {
    USO_REQUIRE(exp && out, "null argument");
    *out = nullptr;
    return guard([&] {
        const uso::RunResult r = uso::run(exp->cfg);
        *out = new uso_result{r.best.fom, r.buffer.size(), r.transcripts ? r.transcripts->size() : 0,
                              r.artifacts.manifest, r.artifacts.summary};
    });
}

void uso_experiment_free(uso_experiment* exp) { delete exp; }

double uso_result_best_fom(const uso_result* result) {
    return result ? result->best_fom : std::numeric_limits<double>::quiet_NaN();
}
size_t uso_result_evaluations(const uso_result* result) { return result ? result->evaluations : 0; }
size_t uso_result_transcripts(const uso_result* result) { return result ? result->transcripts : 0; }
const char* uso_result_manifest_path(const uso_result* result) {
    return result ? result->manifest.c_str() : nullptr;
}
const char* uso_result_summary_path(const uso_result* result) {
    return result ? result->summary.c_str() : nullptr;
}
void uso_result_free(uso_result* result) { delete result; }

// ---- benchmarks

uso_status uso_bench_run_dir(const char* config_dir, const uint64_t* seeds, size_t n_seeds,
                             const char* out_dir, uso_bench** out) {
    USO_REQUIRE(config_dir && out, "null argument");
    *out = nullptr;
    return guard([&] {
        namespace fs = std::filesystem;
        std::error_code ec;
        if (!fs::is_directory(config_dir, ec))
            throw uso::Error(uso::ErrorKind::Config, std::string("'") + config_dir + "' is not a directory");
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(config_dir))
            if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        if (files.empty())
            throw uso::Error(uso::ErrorKind::Config, std::string("no *.json configs in '") + config_dir + "'");
        std::vector<uso::LabeledConfig> configs;
        for (const auto& f : files)
            configs.push_back({f.stem().string(), uso::load_experiment_config(f.string())});
        *out = make_bench(uso::bench(configs, seed_list(seeds, n_seeds), out_dir ? out_dir : ""));
    });
}

uso_status uso_bench_run_preset(const char* preset, const uint64_t* seeds, size_t n_seeds,
                                const char* out_dir, uso_bench** out) {
    USO_REQUIRE(preset && out, "null argument");
    *out = nullptr;
    return guard([&] {
        if (std::string(preset) != "transfer")
            throw uso::Error(uso::ErrorKind::Config, std::string("unknown bench preset '") + preset + "'");
        const auto study = uso::prepare_transfer_study(0, 0);
        *out = make_bench(uso::bench(study.target_configs, seed_list(seeds, n_seeds), out_dir ? out_dir : ""));
    });
}

size_t uso_bench_runs(const uso_bench* bench) { return bench ? bench->report.cells.size() : 0; }
size_t uso_bench_failures(const uso_bench* bench) { return bench ? bench->report.failed() : 0; }
const char* uso_bench_table(const uso_bench* bench) { return bench ? bench->table.c_str() : nullptr; }
const char* uso_bench_csv(const uso_bench* bench) { return bench ? bench->csv.c_str() : nullptr; }
void uso_bench_free(uso_bench* bench) { delete bench; }

// ---- surrogate and acquisition

uso_status uso_gp_fit(const double* x, size_t n, size_t d, const double* y, const double* lo,
                      const double* hi, uint64_t seed, uso_gp** out) {
    USO_REQUIRE(x && y && lo && hi && out, "null argument");
    USO_REQUIRE(n >= 1 && d >= 1, "empty training set");
    *out = nullptr;
    return guard([&] {
        Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
        Eigen::VectorXd Y(static_cast<Eigen::Index>(n));
        for (size_t i = 0; i < n; ++i) {
            for (size_t j = 0; j < d; ++j)
                X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x[i * d + j];
            Y(static_cast<Eigen::Index>(i)) = y[i];
        }
        *out = new uso_gp{uso::GpModel::fit(X, Y, std::span<const double>(lo, d),
                                            std::span<const double>(hi, d), seed)};
    });
}

uso_status uso_gp_predict(const uso_gp* gp, const double* x, double* mu, double* sigma) {
    USO_REQUIRE(gp && x && mu && sigma, "null argument");
    return guard([&] {
        const auto p = gp->model.predict(std::span<const double>(x, gp->model.dims()));
        *mu = p.mu;
        *sigma = p.sigma;
    });
}

uso_status uso_gp_expected_improvement(const uso_gp* gp, const double* x, double best_y, double* ei) {
    USO_REQUIRE(gp && x && ei, "null argument");
    return guard([&] {
        *ei = uso::expected_improvement(gp->model, std::span<const double>(x, gp->model.dims()), best_y);
    });
}

double uso_gp_log_marginal_likelihood(const uso_gp* gp) {
    return gp ? gp->model.lml() : std::numeric_limits<double>::quiet_NaN();
}

void uso_gp_free(uso_gp* gp) { delete gp; }

double uso_ucb(double mu, double sigma, double kappa) { return uso::ucb(mu, sigma, kappa); }

double uso_expected_improvement(double mu, double sigma, double best_y) {
    return uso::expected_improvement(mu, sigma, best_y);
}

}  // extern "C"
