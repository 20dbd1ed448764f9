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

#ifndef USO_CIRCUIT_SPEC_HPP
#define USO_CIRCUIT_SPEC_HPP

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace uso {

/// True when `id` matches `[A-Za-z_][A-Za-z0-9_]*`.
bool is_identifier(std::string_view id) noexcept;

enum class Goal { Maximize, Minimize };

struct MetricSpec {
    std::string id;
    Goal goal = Goal::Maximize;
    double threshold = 0.0;  // >= for Maximize, <= for Minimize
    double scale = 1.0;      // strictly positive normalization reference

    /// Default scale rule: |threshold| when nonzero, else 1.
    static double default_scale(double threshold) noexcept;

    bool meets(double value) const noexcept {
        return goal == Goal::Maximize ? value >= threshold : value <= threshold;
    }
};

struct ParamSpec {
    std::string id;
    double lo = 0.0;
    double hi = 1.0;
    std::string unit;
    std::string substructure;

    double range() const noexcept { return hi - lo; }
    double center() const noexcept { return 0.5 * (lo + hi); }
};

/// Built-in closed-form circuit or test function, selected by name.
struct AnalyticBinding {
    std::string name;
    unsigned family_seed = 0;
};

struct TestFnBinding {
    std::string name;
};

/// `{input}` and `{output}` placeholders are substituted with per-evaluation
/// exchange file paths.
struct ExternalBinding {
    std::string command_template;
    double timeout_s = 60.0;
    std::string exchange_dir;
};

using EvaluatorBinding = std::variant<AnalyticBinding, TestFnBinding, ExternalBinding>;

/// Named real-valued design vector. Keys must equal the owning spec's
/// parameter set.
struct DesignPoint {
    std::map<std::string, double> values;

    double at(const std::string& id) const;
    bool operator==(const DesignPoint&) const = default;
};

class CircuitSpec {
public:
    std::string circuit_id;
    std::vector<ParamSpec> params;
    std::vector<MetricSpec> metrics;
    std::set<std::string> substructure_tags;
    std::string netlist_text;
    EvaluatorBinding binding = TestFnBinding{};
    /// Optional seeded Gaussian observation noise on analytic/test bindings.
    double noise_std = 0.0;

    std::size_t dims() const noexcept { return params.size(); }

    const ParamSpec* find_param(std::string_view id) const noexcept;
    const MetricSpec* find_metric(std::string_view id) const noexcept;
    bool has_substructure(std::string_view id) const noexcept;

    /// Throws Error(InvalidArgument) on any broken invariant: bad ids,
    /// duplicate ids, lo >= hi, nonpositive scale, untagged sub-structure.
    void validate() const;

    std::vector<double> lower_bounds() const;
    std::vector<double> upper_bounds() const;

    /// Parameter values in declaration order.
    std::vector<double> to_vector(const DesignPoint& x) const;
    DesignPoint from_vector(std::span<const double> v) const;

    /// Unit-cube coordinates in declaration order.
    std::vector<double> to_unit(const DesignPoint& x) const;
    DesignPoint from_unit(std::span<const double> u) const;

    DesignPoint center() const;
    bool contains(const DesignPoint& x) const;
    /// Clamp every coordinate into [lo, hi]; returns true if any moved.
    bool clip(DesignPoint& x) const;
};

// JSON schema used by spec files (see docs/config.md).
CircuitSpec spec_from_json(const nlohmann::json& j, const std::string& base_dir = {});
nlohmann::json spec_to_json(const CircuitSpec& spec);
CircuitSpec load_spec(const std::string& path);

}  // namespace uso

#endif  // USO_CIRCUIT_SPEC_HPP
