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

#include "uso/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "uso/error.hpp"

namespace uso {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void config_error(const std::string& m) { throw Error(ErrorKind::Config, m); }

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) config_error(where + " must be an object");
    for (const auto& [key, _] : j.items())
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            config_error("unknown key '" + key + "' in " + where);
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if constexpr (std::is_unsigned_v<T>) {
        if (!v.is_number_integer() || v.get<long long>() < 0)
            config_error("'" + std::string(key) + "' in " + where + " must be a non-negative integer");
    } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer())
            config_error("'" + std::string(key) + "' in " + where + " must be an integer");
    }
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        config_error("bad value for '" + std::string(key) + "' in " + where);
    }
}

std::string resolve(const std::string& base_dir, const std::string& path) {
    if (path.empty() || base_dir.empty() || fs::path(path).is_absolute()) return path;
    return (fs::path(base_dir) / path).lexically_normal().string();
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) config_error("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CircuitSpec circuit_from(const json& j, const std::string& base_dir, const std::string& where) {
    if (j.is_string()) return load_spec(resolve(base_dir, j.get<std::string>()));
    if (j.is_object()) return spec_from_json(j, base_dir);
    config_error(where + " must be a spec path or an inline spec object");
}

KnowledgeSummary summary_from(const std::string& path) {
    try {
        return load_summary(path);
    } catch (const ParseError& e) {
        config_error(path + ":" + std::to_string(e.line()) + ": " + e.reason());
    } catch (const Error& e) {
        config_error(e.what());
    }
}

AdvisorConfig advisor_from(const json& j, AdvisorConfig c, const std::string& where) {
    reject_unknown(j, {"endpoint", "model_name", "temperature", "max_tokens", "context_window",
                       "timeout_s", "max_retries", "backoff_base_s"},
                   where);
    c.endpoint = get_or<std::string>(j, "endpoint", c.endpoint, where);
    c.model_name = get_or<std::string>(j, "model_name", c.model_name, where);
    c.temperature = get_or<double>(j, "temperature", c.temperature, where);
    c.max_tokens = get_or<int>(j, "max_tokens", c.max_tokens, where);
    c.context_window = get_or<int>(j, "context_window", c.context_window, where);
    c.timeout_s = get_or<double>(j, "timeout_s", c.timeout_s, where);
    c.max_retries = get_or<int>(j, "max_retries", c.max_retries, where);
    c.backoff_base_s = get_or<double>(j, "backoff_base_s", c.backoff_base_s, where);
    return c;
}

MockCritique critique_from(const std::string& s) {
    if (s == "identity") return MockCritique::Identity;
    if (s == "annotate_one") return MockCritique::AnnotateOne;
    if (s == "garbage") return MockCritique::Garbage;
    config_error("mock critique must be identity, annotate_one or garbage, not '" + s + "'");
}

MockPolicy policy_from(const std::string& s) {
    if (auto p = mock_policy_from_string(s)) return *p;
    config_error("mock policy must be perturb, knowledge_guided or fixed_script, not '" + s + "'");
}

Mode mode_from(const std::string& s) {
    if (auto m = mode_from_string(s)) return *m;
    config_error("mode must be BO, HYBRID, USO_R or USO_C, not '" + s + "'");
}

void advisors_from(const json& j, const std::string& base_dir, AdvisorSetup& a) {
    reject_unknown(j, {"working", "critique", "mock"}, "advisor");
    if (j.contains("working")) a.working = advisor_from(j["working"], a.working, "advisor.working");
    if (j.contains("critique")) a.critique = advisor_from(j["critique"], a.critique, "advisor.critique");
    a.working.role = AdvisorRole::Working;
    a.critique.role = AdvisorRole::Critique;
    if (j.contains("mock")) {
        const json& m = j["mock"];
        reject_unknown(m, {"policy", "seed", "knowledge", "script", "critique"}, "advisor.mock");
        MockOptions o;
        o.policy = policy_from(get_or<std::string>(m, "policy", "perturb", "advisor.mock"));
        o.seed = get_or<std::uint64_t>(m, "seed", 0, "advisor.mock");
        if (m.contains("knowledge"))
            o.knowledge = summary_from(resolve(base_dir, get_or<std::string>(m, "knowledge", "", "advisor.mock")));
        if (m.contains("script")) {
            try {
                o.script = load_mock_script(resolve(base_dir, get_or<std::string>(m, "script", "", "advisor.mock")));
            } catch (const Error& e) {
                config_error(e.what());
            }
        }
        o.critique = critique_from(get_or<std::string>(m, "critique", "identity", "advisor.mock"));
        a.mock_critique = o.critique;
        a.mock = std::move(o);
    }
}

AcquisitionConfig acquisition_from(const json& j, AcquisitionConfig c) {
    reject_unknown(j, {"n_restarts", "refine_steps", "mc_samples", "refinement"}, "acquisition");
    c.n_restarts = get_or<int>(j, "n_restarts", c.n_restarts, "acquisition");
    c.refine_steps = get_or<int>(j, "refine_steps", c.refine_steps, "acquisition");
    c.mc_samples = get_or<int>(j, "mc_samples", c.mc_samples, "acquisition");
    const std::string r = get_or<std::string>(j, "refinement", "quasi_newton", "acquisition");
    if (r == "quasi_newton") {
        c.refinement = Refinement::QuasiNewton;
    } else if (r == "coordinate") {
        c.refinement = Refinement::Coordinate;
    } else {
        config_error("acquisition.refinement must be quasi_newton or coordinate");
    }
    return c;
}

}  // namespace

ExperimentConfig experiment_config_from_json(const json& j, const std::string& base_dir) {
    reject_unknown(j, {"description", "circuit", "mode", "init_points", "iterations", "sims_per_step",
                       "demos_k", "kappa", "seed", "bo_init", "summary_update", "output_dir",
                       "advisor", "reuse_library", "context_overrides", "acquisition"},
                   "config");
    if (!j.contains("circuit")) config_error("config needs a 'circuit'");
    ExperimentConfig c;
    c.spec = circuit_from(j["circuit"], base_dir, "circuit");
    c.mode = mode_from(get_or<std::string>(j, "mode", "USO_C", "config"));
    c.init_points = get_or<std::size_t>(j, "init_points", c.init_points, "config");
    c.iterations = get_or<std::size_t>(j, "iterations", c.iterations, "config");
    c.sims_per_step = get_or<std::size_t>(j, "sims_per_step", c.sims_per_step, "config");
    c.demos_k = get_or<std::size_t>(j, "demos_k", c.demos_k, "config");
    c.kappa = get_or<double>(j, "kappa", c.kappa, "config");
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed, "config");
    const std::string init = get_or<std::string>(j, "bo_init", "lhs", "config");
    if (init == "lhs") {
        c.bo_init = BoInit::Lhs;
    } else if (init == "advisor") {
        c.bo_init = BoInit::Advisor;
    } else {
        config_error("bo_init must be lhs or advisor");
    }
    const std::string upd = get_or<std::string>(j, "summary_update", "replace", "config");
    if (upd == "replace") {
        c.summary_update = SummaryUpdate::Replace;
    } else if (upd == "accumulate") {
        c.summary_update = SummaryUpdate::Accumulate;
    } else {
        config_error("summary_update must be replace or accumulate");
    }
    if (j.contains("output_dir"))
        c.output_dir = resolve(base_dir, get_or<std::string>(j, "output_dir", "", "config"));
    if (j.contains("advisor")) advisors_from(j["advisor"], base_dir, c.advisors);
    if (j.contains("acquisition")) c.acquisition = acquisition_from(j["acquisition"], c.acquisition);

    if (j.contains("reuse_library")) {
        const json& lib = j["reuse_library"];
        if (!lib.is_array()) config_error("reuse_library must be a list");
        for (const json& e : lib) {
            reject_unknown(e, {"spec", "summary", "netlist_file"}, "reuse_library entry");
            if (!e.contains("spec") || !e.contains("summary"))
                config_error("reuse_library entry needs 'spec' and 'summary'");
            LibraryEntry le{circuit_from(e["spec"], base_dir, "reuse_library spec"),
                            summary_from(resolve(base_dir, get_or<std::string>(e, "summary", "", "reuse_library entry")))};
            if (e.contains("netlist_file"))
                c.library_netlists[le.spec.circuit_id] =
                    read_text(resolve(base_dir, get_or<std::string>(e, "netlist_file", "", "reuse_library entry")));
            c.library.push_back(std::move(le));
        }
    }
    if (j.contains("context_overrides")) {
        const json& o = j["context_overrides"];
        if (!o.is_object()) config_error("context_overrides must map circuit ids to lists");
        for (const auto& [k, v] : o.items()) {
            if (!v.is_array()) config_error("context_overrides['" + k + "'] must be a list");
            for (const auto& id : v) {
                if (!id.is_string()) config_error("context_overrides['" + k + "'] must hold ids");
                c.context_overrides[k].push_back(id.get<std::string>());
            }
        }
    }
    c.validate();
    return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    const std::string text = read_text(path);
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) config_error("'" + path + "' is not valid JSON");
    return experiment_config_from_json(j, fs::path(path).parent_path().string());
}

namespace {

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    if (v.empty() || !std::all_of(v.begin(), v.end(), [](unsigned char c) { return std::isdigit(c); }))
        config_error("--" + key + " needs a non-negative integer, got '" + v + "'");
    try {
        return std::stoull(v);
    } catch (const std::exception&) {
        config_error("--" + key + " value '" + v + "' is out of range");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size()) config_error("--" + key + " needs a number, got '" + v + "'");
    return d;
}

}  // namespace

void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "mode") {
        cfg.mode = mode_from(value);
    } else if (key == "seed") {
        cfg.seed = parse_u64(key, value);
    } else if (key == "iters") {
        cfg.iterations = parse_u64(key, value);
    } else if (key == "init") {
        cfg.init_points = parse_u64(key, value);
    } else if (key == "kappa") {
        cfg.kappa = parse_double(key, value);
    } else if (key == "advisor-endpoint") {
        cfg.advisors.working.endpoint = value;
        cfg.advisors.critique.endpoint = value;
        cfg.advisors.mock.reset();
    } else if (key == "mock-advisor") {
        MockOptions o = cfg.advisors.mock.value_or(MockOptions{});
        o.policy = policy_from(value);
        cfg.advisors.mock = std::move(o);
    } else if (key == "out") {
        cfg.output_dir = value;
    } else {
        config_error("unknown override '" + key + "'");
    }
    if (!cfg.annotations.is_object()) cfg.annotations = json::object();
    cfg.annotations["overrides"][key] = value;
}

}  // namespace uso
