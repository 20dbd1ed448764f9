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

#include "uso/circuit_spec.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "uso/error.hpp"
#include "uso/evaluator.hpp"

namespace uso {

using nlohmann::json;

bool is_identifier(std::string_view id) noexcept {
    if (id.empty()) return false;
    auto alpha = [](char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_'; };
    if (!alpha(id.front())) return false;
    return std::all_of(id.begin() + 1, id.end(),
                       [&](char c) { return alpha(c) || (c >= '0' && c <= '9'); });
}

double MetricSpec::default_scale(double threshold) noexcept {
    return threshold != 0.0 ? std::fabs(threshold) : 1.0;
}

double DesignPoint::at(const std::string& id) const {
    auto it = values.find(id);
    if (it == values.end())
        throw Error(ErrorKind::InvalidArgument, "design point has no parameter '" + id + "'");
    return it->second;
}

const ParamSpec* CircuitSpec::find_param(std::string_view id) const noexcept {
    for (const auto& p : params)
        if (p.id == id) return &p;
    return nullptr;
}

const MetricSpec* CircuitSpec::find_metric(std::string_view id) const noexcept {
    for (const auto& m : metrics)
        if (m.id == id) return &m;
    return nullptr;
}

bool CircuitSpec::has_substructure(std::string_view id) const noexcept {
    return substructure_tags.count(std::string(id)) > 0;
}

void CircuitSpec::validate() const {
    auto fail = [&](const std::string& why) {
        throw Error(ErrorKind::InvalidArgument, "circuit '" + circuit_id + "': " + why);
    };
    if (!is_identifier(circuit_id)) fail("circuit id is not a valid token");
    if (params.empty()) fail("no parameters");
    if (metrics.empty()) fail("no metrics");
    for (const auto& tag : substructure_tags)
        if (!is_identifier(tag)) fail("bad sub-structure id '" + tag + "'");
    std::set<std::string> seen;
    for (const auto& p : params) {
        if (!is_identifier(p.id)) fail("bad parameter id '" + p.id + "'");
        if (!seen.insert(p.id).second) fail("duplicate parameter '" + p.id + "'");
        if (!(std::isfinite(p.lo) && std::isfinite(p.hi) && p.lo < p.hi))
            fail("parameter '" + p.id + "' needs finite lo < hi");
        if (!has_substructure(p.substructure))
            fail("parameter '" + p.id + "' names undeclared sub-structure '" + p.substructure + "'");
    }
    seen.clear();
    for (const auto& m : metrics) {
        if (!is_identifier(m.id)) fail("bad metric id '" + m.id + "'");
        if (!seen.insert(m.id).second) fail("duplicate metric '" + m.id + "'");
        if (!(m.scale > 0.0) || !std::isfinite(m.scale)) fail("metric '" + m.id + "' needs scale > 0");
        if (!std::isfinite(m.threshold)) fail("metric '" + m.id + "' has a non-finite threshold");
    }
}

std::vector<double> CircuitSpec::lower_bounds() const {
    std::vector<double> v;
    v.reserve(params.size());
    for (const auto& p : params) v.push_back(p.lo);
    return v;
}

std::vector<double> CircuitSpec::upper_bounds() const {
    std::vector<double> v;
    v.reserve(params.size());
    for (const auto& p : params) v.push_back(p.hi);
    return v;
}

std::vector<double> CircuitSpec::to_vector(const DesignPoint& x) const {
    std::vector<double> v;
    v.reserve(params.size());
    for (const auto& p : params) v.push_back(x.at(p.id));
    return v;
}

DesignPoint CircuitSpec::from_vector(std::span<const double> v) const {
    if (v.size() != params.size())
        throw Error(ErrorKind::InvalidArgument, "vector length does not match parameter count");
    DesignPoint x;
    for (std::size_t i = 0; i < params.size(); ++i) x.values[params[i].id] = v[i];
    return x;
}

std::vector<double> CircuitSpec::to_unit(const DesignPoint& x) const {
    std::vector<double> u;
    u.reserve(params.size());
    for (const auto& p : params) u.push_back((x.at(p.id) - p.lo) / p.range());
    return u;
}

DesignPoint CircuitSpec::from_unit(std::span<const double> u) const {
    if (u.size() != params.size())
        throw Error(ErrorKind::InvalidArgument, "vector length does not match parameter count");
    DesignPoint x;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& p = params[i];
        x.values[p.id] = std::clamp(p.lo + u[i] * p.range(), p.lo, p.hi);
    }
    return x;
}

DesignPoint CircuitSpec::center() const {
    DesignPoint x;
    for (const auto& p : params) x.values[p.id] = p.center();
    return x;
}

bool CircuitSpec::contains(const DesignPoint& x) const {
    if (x.values.size() != params.size()) return false;
    for (const auto& p : params) {
        auto it = x.values.find(p.id);
        if (it == x.values.end()) return false;
        if (!(it->second >= p.lo && it->second <= p.hi)) return false;
    }
    return true;
}

bool CircuitSpec::clip(DesignPoint& x) const {
    bool moved = false;
    for (const auto& p : params) {
        auto& v = x.values.at(p.id);
        double c = std::clamp(v, p.lo, p.hi);
        if (c != v) {
            v = c;
            moved = true;
        }
    }
    return moved;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

[[noreturn]] void config_error(const std::string& why) {
    throw Error(ErrorKind::Config, why);
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                    const std::string& where) {
    if (!j.is_object()) config_error(where + " must be an object");
    for (const auto& [key, _] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            config_error("unknown key '" + key + "' in " + where);
    }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        config_error("bad value for '" + std::string(key) + "' in " + where);
    }
}

template <class T>
T require(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) config_error("missing '" + std::string(key) + "' in " + where);
    return get_or<T>(j, key, T{}, where);
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string resolve(const std::string& base_dir, const std::string& path) {
    if (path.empty() || base_dir.empty()) return path;
    std::filesystem::path p(path);
    if (p.is_absolute()) return path;
    return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

}  // namespace

CircuitSpec spec_from_json(const json& j, const std::string& base_dir) {
    if (j.is_object() && j.contains("builtin")) {
        reject_unknown(j, {"builtin", "family_seed", "noise_std"}, "circuit");
        CircuitSpec spec;
        try {
            spec = builtin_circuit(require<std::string>(j, "builtin", "circuit"),
                                   get_or<unsigned>(j, "family_seed", 0, "circuit"));
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Config) throw;
            config_error(e.what());
        }
        spec.noise_std = get_or<double>(j, "noise_std", 0.0, "circuit");
        return spec;
    }
    reject_unknown(j, {"circuit_id", "substructures", "params", "metrics", "netlist",
                       "netlist_file", "evaluator", "noise_std"},
                   "circuit spec");
    CircuitSpec spec;
    spec.circuit_id = require<std::string>(j, "circuit_id", "circuit spec");
    for (const auto& tag : get_or<std::vector<std::string>>(j, "substructures", {}, "circuit spec"))
        spec.substructure_tags.insert(tag);
    if (!j.contains("params") || !j["params"].is_array()) config_error("circuit spec needs a params array");
    for (const auto& pj : j["params"]) {
        reject_unknown(pj, {"id", "lo", "hi", "unit", "substructure"}, "param");
        ParamSpec p;
        p.id = require<std::string>(pj, "id", "param");
        p.lo = require<double>(pj, "lo", "param '" + p.id + "'");
        p.hi = require<double>(pj, "hi", "param '" + p.id + "'");
        p.unit = get_or<std::string>(pj, "unit", "", "param");
        p.substructure = require<std::string>(pj, "substructure", "param '" + p.id + "'");
        spec.params.push_back(std::move(p));
    }
    if (!j.contains("metrics") || !j["metrics"].is_array()) config_error("circuit spec needs a metrics array");
    for (const auto& mj : j["metrics"]) {
        reject_unknown(mj, {"id", "goal", "threshold", "scale"}, "metric");
        MetricSpec m;
        m.id = require<std::string>(mj, "id", "metric");
        auto goal = get_or<std::string>(mj, "goal", "maximize", "metric");
        if (goal == "maximize") m.goal = Goal::Maximize;
        else if (goal == "minimize") m.goal = Goal::Minimize;
        else config_error("metric '" + m.id + "' goal must be maximize or minimize");
        m.threshold = get_or<double>(mj, "threshold", 0.0, "metric");
        m.scale = get_or<double>(mj, "scale", MetricSpec::default_scale(m.threshold), "metric");
        spec.metrics.push_back(std::move(m));
    }
    if (j.contains("netlist") && j.contains("netlist_file"))
        config_error("give either netlist or netlist_file, not both");
    spec.netlist_text = get_or<std::string>(j, "netlist", "", "circuit spec");
    if (j.contains("netlist_file")) {
        try {
            spec.netlist_text = read_text(resolve(base_dir, require<std::string>(j, "netlist_file", "circuit spec")));
        } catch (const Error& e) {
            config_error(e.what());
        }
    }
    spec.noise_std = get_or<double>(j, "noise_std", 0.0, "circuit spec");
    if (j.contains("evaluator")) {
        const auto& ej = j["evaluator"];
        auto kind = require<std::string>(ej, "kind", "evaluator");
        if (kind == "analytic") {
            reject_unknown(ej, {"kind", "name", "family_seed"}, "evaluator");
            spec.binding = AnalyticBinding{require<std::string>(ej, "name", "evaluator"),
                                           get_or<unsigned>(ej, "family_seed", 0, "evaluator")};
        } else if (kind == "testfn") {
            reject_unknown(ej, {"kind", "name"}, "evaluator");
            spec.binding = TestFnBinding{require<std::string>(ej, "name", "evaluator")};
        } else if (kind == "external") {
            reject_unknown(ej, {"kind", "command", "timeout_s", "exchange_dir"}, "evaluator");
            ExternalBinding b;
            b.command_template = require<std::string>(ej, "command", "evaluator");
            b.timeout_s = get_or<double>(ej, "timeout_s", 60.0, "evaluator");
            b.exchange_dir = resolve(base_dir, get_or<std::string>(ej, "exchange_dir", "", "evaluator"));
            if (b.command_template.find("{input}") == std::string::npos ||
                b.command_template.find("{output}") == std::string::npos)
                config_error("external command needs {input} and {output} placeholders");
            spec.binding = std::move(b);
        } else {
            config_error("evaluator kind must be analytic, testfn or external");
        }
    }
    try {
        spec.validate();
    } catch (const Error& e) {
        config_error(e.what());
    }
    return spec;
}

json spec_to_json(const CircuitSpec& spec) {
    json j;
    j["circuit_id"] = spec.circuit_id;
    j["substructures"] = std::vector<std::string>(spec.substructure_tags.begin(),
                                                  spec.substructure_tags.end());
    j["params"] = json::array();
    for (const auto& p : spec.params)
        j["params"].push_back({{"id", p.id}, {"lo", p.lo}, {"hi", p.hi}, {"unit", p.unit},
                               {"substructure", p.substructure}});
    j["metrics"] = json::array();
    for (const auto& m : spec.metrics)
        j["metrics"].push_back({{"id", m.id},
                                {"goal", m.goal == Goal::Maximize ? "maximize" : "minimize"},
                                {"threshold", m.threshold},
                                {"scale", m.scale}});
    if (!spec.netlist_text.empty()) j["netlist"] = spec.netlist_text;
    if (spec.noise_std != 0.0) j["noise_std"] = spec.noise_std;
    std::visit(
        [&](const auto& b) {
            using B = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<B, AnalyticBinding>)
                j["evaluator"] = {{"kind", "analytic"}, {"name", b.name}, {"family_seed", b.family_seed}};
            else if constexpr (std::is_same_v<B, TestFnBinding>)
                j["evaluator"] = {{"kind", "testfn"}, {"name", b.name}};
            else
                j["evaluator"] = {{"kind", "external"},
                                  {"command", b.command_template},
                                  {"timeout_s", b.timeout_s},
                                  {"exchange_dir", b.exchange_dir}};
        },
        spec.binding);
    return j;
}

CircuitSpec load_spec(const std::string& path) {
    std::string text;
    try {
        text = read_text(path);
    } catch (const Error& e) {
        config_error(e.what());
    }
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        config_error("'" + path + "' is not valid JSON: " + e.what());
    }
    return spec_from_json(j, std::filesystem::path(path).parent_path().string());
}

}  // namespace uso
