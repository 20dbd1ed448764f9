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

#ifndef USO_EVALUATOR_HPP
#define USO_EVALUATOR_HPP

#include <atomic>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "uso/buffer.hpp"
#include "uso/circuit_spec.hpp"
#include "uso/knowledge.hpp"

namespace uso {

enum class FailureReason { None, Simulator, Timeout, NonzeroExit, ParseFailure };

const char* to_string(FailureReason r) noexcept;

struct EvaluationOutcome {
    MetricMap metrics;
    bool valid = false;
    FailureReason failure = FailureReason::None;
    std::string diagnostics;
};

/// Dispatches to the circuit's evaluator binding. Analytic and test-function bindings are
/// pure (bit-identical for equal points) unless spec.noise_std > 0, in which
/// case the noise stream is seeded by the point itself. Never returns
/// valid=true with a missing or non-finite metric.
EvaluationOutcome evaluate(const CircuitSpec& spec, const DesignPoint& x);

/// Process-wide count of evaluate() calls; lets run-level code assert that
/// no evaluation escaped the budget.
std::uint64_t evaluation_count() noexcept;

// ---------------------------------------------------------------------------
// Standard test functions. Each exposes a single metric "f" (minimized).

/// Branin-Hoo on x1 in [-5, 10], x2 in [0, 15].
double branin(double x1, double x2) noexcept;
/// Hartmann-6 on [0,1]^6.
double hartmann6(const std::vector<double>& x) noexcept;

/// Spec with a TESTFN binding: "branin", "hartmann6" or "sphere".
CircuitSpec test_function_spec(const std::string& name);

// ---------------------------------------------------------------------------
// Toy analog circuit family.
//
// SOURCE and TARGET share a "diffpair" block (w1, w2, l1, l2) whose metric
// contributions use the same smooth sub-functions in both circuits: a
// concave gain-like term increasing in all four, and a current-like term
// increasing in the widths and decreasing in the lengths. Each variant adds
// its own blocks and metrics.

enum class ToyVariant { Source, Target };

/// Sign of a ground-truth partial derivative, valid everywhere in the box.
struct GroundTruthInfluence {
    std::string param;
    std::string substructure;
    std::string metric;
    Direction direction;
};

struct ToyCircuit {
    CircuitSpec spec;
    std::vector<GroundTruthInfluence> influences;
    /// The family's full ground-truth knowledge (trade-offs, associations,
    /// monotone influences) in KS/1 form.
    KnowledgeSummary ground_truth;
};

ToyCircuit toy_circuit_family(unsigned family_seed, ToyVariant variant);

/// Direct access to the analytic metric functions of a toy circuit.
MetricMap toy_metrics(unsigned family_seed, ToyVariant variant, const DesignPoint& x);

/// The diffpair-derived contributions ("gain_dp", "ugf_dp", "iq_dp") as
/// computed inside the variant's own metric evaluation. Identical across
/// variants for identical diffpair values.
MetricMap toy_shared_components(unsigned family_seed, ToyVariant variant, const DesignPoint& x);

/// Spec for a built-in circuit name: toy_source, toy_target, branin,
/// hartmann6, sphere. Throws Error(InvalidArgument) for anything else.
CircuitSpec builtin_circuit(const std::string& name, unsigned family_seed = 0);

// ---------------------------------------------------------------------------
// External simulator adapter

/// Writes `param=value` lines to a fresh file under the exchange directory,
/// substitutes `{input}`/`{output}` in the command template, runs it via
/// /bin/sh with a timeout, then reads `metric=value` lines (`#` comments)
/// from the output file. Every failure yields valid=false.
EvaluationOutcome run_external(const ExternalBinding& binding, const CircuitSpec& spec,
                               const DesignPoint& x);

}  // namespace uso

#endif  // USO_EVALUATOR_HPP
