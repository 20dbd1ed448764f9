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

#ifndef USO_ORCHESTRATOR_HPP
#define USO_ORCHESTRATOR_HPP

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uso/acquisition.hpp"
#include "uso/advisor.hpp"
#include "uso/buffer.hpp"
#include "uso/circuit_spec.hpp"
#include "uso/knowledge.hpp"

namespace uso {

enum class Mode { Bo, Hybrid, UsoR, UsoC };

const char* to_string(Mode m) noexcept;
std::optional<Mode> mode_from_string(const std::string& s);

/// Advisor suggestion queries issued per optimization step.
int queries_per_step(Mode m) noexcept;
constexpr bool uses_advisor(Mode m) noexcept { return m != Mode::Bo; }
constexpr bool uses_reuse(Mode m) noexcept { return m == Mode::UsoR || m == Mode::UsoC; }

enum class BoInit { Lhs, Advisor };
enum class SummaryUpdate { Replace, Accumulate };

/// Either a real endpoint or an in-process mock for each role.
struct AdvisorSetup {
    AdvisorConfig working = AdvisorConfig::working_default();
    AdvisorConfig critique = AdvisorConfig::critique_default();
    std::optional<MockOptions> mock;
    /// Critique-role mock behaviour when `mock` is set.
    MockCritique mock_critique = MockCritique::Identity;
};

struct ExperimentConfig {
    CircuitSpec spec;
    Mode mode = Mode::UsoC;
    std::size_t init_points = 5;   // I
    std::size_t iterations = 20;   // T
    std::size_t sims_per_step = 2; // m
    std::size_t demos_k = 3;
    double kappa = 1.0;
    std::uint64_t seed = 0;
    BoInit bo_init = BoInit::Lhs;
    SummaryUpdate summary_update = SummaryUpdate::Replace;
    AcquisitionConfig acquisition;
    AdvisorSetup advisors;
    std::vector<LibraryEntry> library;
    ContextOverrides context_overrides;
    /// Netlists of library circuits, keyed by circuit id; defaults to each
    /// library spec's own netlist text.
    std::map<std::string, std::string> library_netlists;
    std::string output_dir;  // empty: keep everything in memory
    /// Free-form provenance recorded in the manifest (CLI overrides etc).
    nlohmann::json annotations = nlohmann::json::object();

    std::size_t budget() const noexcept { return init_points + sims_per_step * iterations; }
    /// Throws Error(Config).
    void validate() const;
};

struct TraceRow {
    nlohmann::json row;
};

struct RunArtifacts {
    std::string manifest;
    std::string buffer;
    std::string trace;
    std::string transcripts;
    std::string summary;  // empty when no summary was produced
};

struct RunResult {
    EvaluationRecord best;
    std::optional<KnowledgeSummary> summary;
    Buffer buffer;
    std::vector<nlohmann::json> trace;
    std::shared_ptr<TranscriptLog> transcripts;
    RunArtifacts artifacts;
    std::uint64_t evaluator_calls = 0;
    std::vector<std::string> warnings;
    /// 1-based count of evaluations until every metric met its threshold.
    std::optional<std::size_t> evaluations_to_spec;
};

/// One optimization run. Use run() for the whole loop or drive
/// initialize()/step()/finish() directly.
class Orchestrator {
public:
    explicit Orchestrator(ExperimentConfig config);
    ~Orchestrator();
    Orchestrator(const Orchestrator&) = delete;
    Orchestrator& operator=(const Orchestrator&) = delete;

    void initialize();
    void step();
    RunResult finish();

    RunResult run();

    const ExperimentConfig& config() const noexcept;
    const Buffer& buffer() const noexcept;
    const std::vector<nlohmann::json>& trace() const noexcept;
    const TranscriptLog& transcripts() const noexcept;
    std::size_t evaluations() const noexcept;
    std::size_t completed_steps() const noexcept;
    const std::optional<KnowledgeSummary>& summary() const noexcept;
    const ContextDocument& reuse_context() const noexcept;

    /// Writes whatever exists so far (buffer, trace, transcripts, summary,
    /// manifest) under output_dir. Called automatically by run(), also on
    /// failure.
    RunArtifacts export_artifacts(const std::string& status) const;

private:
    struct State;
    std::unique_ptr<State> s_;
};

inline RunResult run(const ExperimentConfig& config) { return Orchestrator(config).run(); }

// ---------------------------------------------------------------------------
// Benchmarks

struct BenchCell {
    std::string label;
    Mode mode;
    std::uint64_t seed;
    bool ok = false;
    std::string error;
    double best_fom = 0.0;
    std::optional<std::size_t> evaluations_to_spec;
};

struct BenchAggregate {
    std::string label;
    Mode mode;
    std::size_t runs = 0;
    std::size_t failures = 0;
    double median_best_fom = 0.0;
    double iqr_best_fom = 0.0;
    /// Infinity when the median run never met spec.
    double median_evals_to_spec = 0.0;
    std::size_t reached_spec = 0;
};

struct BenchReport {
    std::vector<BenchCell> cells;
    std::vector<BenchAggregate> aggregates;

    std::string to_csv() const;
    std::string to_table() const;
    std::size_t failed() const noexcept;
};

struct LabeledConfig {
    std::string label;
    ExperimentConfig config;
};

/// Runs configs x seeds; per-cell artifacts go to <out_dir>/<label>/seed_<s>
/// when out_dir is non-empty. Aggregate rows follow config order.
BenchReport bench(const std::vector<LabeledConfig>& configs,
                  const std::vector<std::uint64_t>& seeds, const std::string& out_dir = {});

/// Median with linear interpolation; infinities sort last.
double median(std::vector<double> v);
/// q75 - q25 with linear interpolation.
double interquartile_range(std::vector<double> v);

/// Toy SOURCE -> TARGET transfer study: the SOURCE circuit is optimized in
/// USO_R mode to produce its refined summary, which becomes the TARGET's
/// reuse library for USO_R/USO_C; HYBRID runs without it.
struct TransferStudy {
    KnowledgeSummary source_summary;
    std::vector<LabeledConfig> target_configs;
};

TransferStudy prepare_transfer_study(unsigned family_seed, std::uint64_t source_seed);

}  // namespace uso

#endif  // USO_ORCHESTRATOR_HPP
