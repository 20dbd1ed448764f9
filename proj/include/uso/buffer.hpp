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

#ifndef USO_BUFFER_HPP
#define USO_BUFFER_HPP

#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "uso/circuit_spec.hpp"

namespace uso {

using MetricMap = std::map<std::string, double>;

/// Signed sum of normalized metrics: sum_j (-1)^{s_j} * p_j / scale_j with
/// s_j = 0 for maximized and 1 for minimized metrics.
///
/// Throws Error(MissingMetric) or Error(NonFiniteMetric).
double compute_fom(const MetricMap& metrics, std::span<const MetricSpec> specs);

enum class RecordSource { Init, Bo, Advisor };

const char* to_string(RecordSource s) noexcept;

inline constexpr double kInvalidFom = -std::numeric_limits<double>::infinity();

struct EvaluationRecord {
    DesignPoint point;
    MetricMap metrics;
    double fom = kInvalidFom;
    std::size_t iteration = 0;
    RecordSource source = RecordSource::Init;
    bool valid = false;

    /// Builds a record, scoring it when `valid`. Invalid records always carry
    /// kInvalidFom.
    static EvaluationRecord make(DesignPoint point, MetricMap metrics, bool valid,
                                 std::size_t iteration, RecordSource source,
                                 std::span<const MetricSpec> specs);
};

/// Append-only evaluation history.
///
/// Single writer: the first thread that inserts becomes the owner and any
/// later insert from another thread throws Error(Concurrency). Readers on
/// other threads are allowed between writes; they take a shared lock.
class Buffer {
public:
    Buffer() = default;
    Buffer(const Buffer& other);
    Buffer& operator=(const Buffer& other);

    void insert(EvaluationRecord record);

    std::size_t size() const;
    std::size_t valid_count() const;
    bool empty() const { return size() == 0; }

    /// Copy of the i-th record in insertion order.
    EvaluationRecord at(std::size_t i) const;
    std::vector<EvaluationRecord> records() const;

    /// Valid records by FOM descending, earlier insertion first on ties.
    std::vector<EvaluationRecord> top_k(std::size_t k) const;

    /// Throws Error(EmptyBuffer) when no valid record exists.
    EvaluationRecord best() const;
    std::optional<double> best_fom() const;

    /// One JSON object per line: point, metrics, fom (null when invalid),
    /// iteration, source, valid.
    std::string to_jsonl() const;
    void export_jsonl(const std::string& path) const;

private:
    std::vector<std::size_t> ranked_indices() const;

    mutable std::shared_mutex mutex_;
    std::optional<std::thread::id> writer_;
    std::vector<EvaluationRecord> records_;
};

}  // namespace uso

#endif  // USO_BUFFER_HPP
