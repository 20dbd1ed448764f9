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

/*
 * C interface to libuso.
 *
 * Objects are opaque handles created by the load, parse, run and fit functions and
 * released with the matching *_free. Every fallible call returns a
 * uso_status; on failure uso_last_error() describes the problem for the
 * calling thread until its next failing call. Strings returned through
 * `char**` out-parameters are owned by the caller and released with
 * uso_string_free; `const char*` results are owned by the handle.
 */

#ifndef USO_USO_H
#define USO_USO_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(USO_BUILDING_LIBRARY)
#    define USO_API __declspec(dllexport)
#  else
#    define USO_API __declspec(dllimport)
#  endif
#else
#  define USO_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum uso_status {
    USO_OK = 0,
    USO_E_INVALID_ARGUMENT = 1,
    USO_E_PARSE = 2,
    USO_E_CONFIG = 3,
    USO_E_RUNTIME = 4,
    USO_E_IO = 5,
    USO_E_EMPTY = 6,
    USO_E_ADVISOR = 7
} uso_status;

typedef struct uso_summary uso_summary;
typedef struct uso_spec uso_spec;
typedef struct uso_report uso_report;
typedef struct uso_experiment uso_experiment;
typedef struct uso_result uso_result;
typedef struct uso_bench uso_bench;
typedef struct uso_gp uso_gp;

USO_API const char* uso_version(void);
USO_API const char* uso_last_error(void);
/* 1-based line of the last KS/1 parse failure on this thread, 0 if none. */
USO_API size_t uso_last_error_line(void);
USO_API const char* uso_status_name(uso_status status);
USO_API void uso_string_free(char* s);

/* ---- knowledge summaries (KS/1) ------------------------------------- */

USO_API uso_status uso_summary_parse(const char* text, size_t length, uso_summary** out);
USO_API uso_status uso_summary_load(const char* path, uso_summary** out);
USO_API uso_status uso_summary_serialize(const uso_summary* summary, char** out);
USO_API const char* uso_summary_circuit(const uso_summary* summary);
USO_API size_t uso_summary_record_count(const uso_summary* summary);
USO_API void uso_summary_free(uso_summary* summary);

/* ---- circuit specs ---------------------------------------------------- */

USO_API uso_status uso_spec_load(const char* path, uso_spec** out);
/* Built-in circuits: toy_source, toy_target, branin, hartmann6, sphere. */
USO_API uso_status uso_spec_builtin(const char* name, unsigned family_seed, uso_spec** out);
USO_API size_t uso_spec_dims(const uso_spec* spec);
USO_API void uso_spec_free(uso_spec* spec);

/* ---- validation ------------------------------------------------------- */

USO_API uso_status uso_summary_validate(const uso_summary* summary, const uso_spec* spec,
                                        uso_report** out);
USO_API size_t uso_report_size(const uso_report* report);
USO_API const char* uso_report_line(const uso_report* report, size_t index);
USO_API void uso_report_free(uso_report* report);

/* ---- experiments ------------------------------------------------------ */

/* Parses and validates a config file; nothing is written to disk. */
USO_API uso_status uso_experiment_load(const char* config_path, uso_experiment** out);
/* Keys: mode, seed, iters, init, kappa, advisor-endpoint, mock-advisor, out. */
USO_API uso_status uso_experiment_override(uso_experiment* exp, const char* key,
                                           const char* value);
/* Runs to completion. On a runtime failure the partial artifacts are kept
 * and USO_E_RUNTIME (or USO_E_ADVISOR) is returned. */
USO_API uso_status uso_experiment_run(uso_experiment* exp, uso_result** out);
USO_API void uso_experiment_free(uso_experiment* exp);

USO_API double uso_result_best_fom(const uso_result* result);
USO_API size_t uso_result_evaluations(const uso_result* result);
USO_API size_t uso_result_transcripts(const uso_result* result);
USO_API const char* uso_result_manifest_path(const uso_result* result);
USO_API const char* uso_result_summary_path(const uso_result* result);
USO_API void uso_result_free(uso_result* result);

/* ---- benchmarks ------------------------------------------------------- */

/* Every *.json file in config_dir is one grid row. */
USO_API uso_status uso_bench_run_dir(const char* config_dir, const uint64_t* seeds,
                                     size_t n_seeds, const char* out_dir, uso_bench** out);
/* Presets: "transfer" (toy SOURCE -> TARGET, HYBRID vs USO_R vs USO_C). */
USO_API uso_status uso_bench_run_preset(const char* preset, const uint64_t* seeds,
                                        size_t n_seeds, const char* out_dir, uso_bench** out);
USO_API size_t uso_bench_runs(const uso_bench* bench);
USO_API size_t uso_bench_failures(const uso_bench* bench);
USO_API const char* uso_bench_table(const uso_bench* bench);
USO_API const char* uso_bench_csv(const uso_bench* bench);
USO_API void uso_bench_free(uso_bench* bench);

/* ---- surrogate and acquisition --------------------------------------- */

/* x is row-major n x d; lo/hi have d entries. */
USO_API uso_status uso_gp_fit(const double* x, size_t n, size_t d, const double* y,
                              const double* lo, const double* hi, uint64_t seed,
                              uso_gp** out);
USO_API uso_status uso_gp_predict(const uso_gp* gp, const double* x, double* mu,
                                  double* sigma);
USO_API uso_status uso_gp_expected_improvement(const uso_gp* gp, const double* x,
                                               double best_y, double* ei);
USO_API double uso_gp_log_marginal_likelihood(const uso_gp* gp);
USO_API void uso_gp_free(uso_gp* gp);

USO_API double uso_ucb(double mu, double sigma, double kappa);
USO_API double uso_expected_improvement(double mu, double sigma, double best_y);

#ifdef __cplusplus
}
#endif

#endif /* USO_USO_H */
