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

#include "uso/buffer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>

#include <nlohmann/json.hpp>

#include "uso/error.hpp"

namespace uso {

double compute_fom(const MetricMap& metrics, std::span<const MetricSpec> specs) {
    double fom = 0.0;
    for (const auto& spec : specs) {
        auto it = metrics.find(spec.id);
        if (it == metrics.end()) throw Error(ErrorKind::MissingMetric, "missing metric '" + spec.id + "'");
        if (!std::isfinite(it->second))
            throw Error(ErrorKind::NonFiniteMetric, "metric '" + spec.id + "' is not finite");
        double normalized = it->second / spec.scale;
        fom += spec.goal == Goal::Maximize ? normalized : -normalized;
    }
    return fom;
}

const char* to_string(RecordSource s) noexcept {
    switch (s) {
    case RecordSource::Init: return "INIT";
    case RecordSource::Bo: return "BO";
    case RecordSource::Advisor: return "ADVISOR";
    }
    return "?";
}

EvaluationRecord EvaluationRecord::make(DesignPoint point, MetricMap metrics, bool valid,
                                        std::size_t iteration, RecordSource source,
                                        std::span<const MetricSpec> specs) {
    EvaluationRecord r;
    r.point = std::move(point);
    r.metrics = std::move(metrics);
    r.iteration = iteration;
    r.source = source;
    r.valid = false;
    r.fom = kInvalidFom;
    if (valid) {
        try {
            r.fom = compute_fom(r.metrics, specs);
            r.valid = true;
        } catch (const Error&) {
            r.fom = kInvalidFom;
        }
    }
    return r;
}

Buffer::Buffer(const Buffer& other) {
    std::shared_lock lock(other.mutex_);
    records_ = other.records_;
}

Buffer& Buffer::operator=(const Buffer& other) {
    if (this == &other) return *this;
    std::vector<EvaluationRecord> copy;
    {
        std::shared_lock lock(other.mutex_);
        copy = other.records_;
    }
    std::unique_lock lock(mutex_);
    records_ = std::move(copy);
    writer_.reset();
    return *this;
}

void Buffer::insert(EvaluationRecord record) {
    if (!record.valid) record.fom = kInvalidFom;
    std::unique_lock lock(mutex_);
    const auto self = std::this_thread::get_id();
    if (!writer_) writer_ = self;
    else if (*writer_ != self)
        throw Error(ErrorKind::Concurrency, "buffer insert from a thread other than its writer");
    records_.push_back(std::move(record));
}

std::size_t Buffer::size() const {
    std::shared_lock lock(mutex_);
    return records_.size();
}

std::size_t Buffer::valid_count() const {
    std::shared_lock lock(mutex_);
    return static_cast<std::size_t>(
        std::count_if(records_.begin(), records_.end(), [](const auto& r) { return r.valid; }));
}

EvaluationRecord Buffer::at(std::size_t i) const {
    std::shared_lock lock(mutex_);
    return records_.at(i);
}

std::vector<EvaluationRecord> Buffer::records() const {
    std::shared_lock lock(mutex_);
    return records_;
}

std::vector<std::size_t> Buffer::ranked_indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < records_.size(); ++i)
        if (records_[i].valid) idx.push_back(i);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return records_[a].fom > records_[b].fom; });
    return idx;
}

std::vector<EvaluationRecord> Buffer::top_k(std::size_t k) const {
    std::shared_lock lock(mutex_);
    auto idx = ranked_indices();
    idx.resize(std::min(k, idx.size()));
    std::vector<EvaluationRecord> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(records_[i]);
    return out;
}

EvaluationRecord Buffer::best() const {
    auto top = top_k(1);
    if (top.empty()) throw Error(ErrorKind::EmptyBuffer, "buffer holds no valid record");
    return top.front();
}

std::optional<double> Buffer::best_fom() const {
    auto top = top_k(1);
    if (top.empty()) return std::nullopt;
    return top.front().fom;
}

std::string Buffer::to_jsonl() const {
    std::shared_lock lock(mutex_);
    std::string out;
    for (const auto& r : records_) {
        nlohmann::json j;
        j["point"] = r.point.values;
        j["metrics"] = nlohmann::json::object();
        for (const auto& [k, v] : r.metrics) {
            if (std::isfinite(v)) j["metrics"][k] = v;
            else j["metrics"][k] = nullptr;
        }
        if (r.valid) j["fom"] = r.fom;
        else j["fom"] = nullptr;
        j["iteration"] = r.iteration;
        j["source"] = to_string(r.source);
        j["valid"] = r.valid;
        out += j.dump();
        out += '\n';
    }
    return out;
}

void Buffer::export_jsonl(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
    out << to_jsonl();
}

}  // namespace uso
