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

#include "uso/advisor.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "uso/error.hpp"
#include "uso/sampling.hpp"

namespace uso {

using nlohmann::json;

const char* to_string(AdvisorRole r) noexcept {
    return r == AdvisorRole::Working ? "WORKING" : "CRITIQUE";
}

AdvisorConfig AdvisorConfig::working_default() { return AdvisorConfig{}; }

AdvisorConfig AdvisorConfig::critique_default() {
    AdvisorConfig c;
    c.model_name = "gpt-4";
    c.role = AdvisorRole::Critique;
    return c;
}

void AdvisorConfig::validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorKind::Config, "advisor: " + m); };
    if (!(temperature >= 0.0 && temperature <= 2.0)) fail("temperature must be in [0, 2]");
    if (max_tokens < 1) fail("max_tokens must be >= 1");
    if (context_window < 1) fail("context_window must be >= 1");
    if (!(timeout_s > 0.0)) fail("timeout_s must be > 0");
    if (max_retries < 1) fail("max_retries must be >= 1");
    if (!(backoff_base_s >= 0.0)) fail("backoff_base_s must be >= 0");
}

// ---------------------------------------------------------------------------
// Prompts

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::vector<std::string> metric_ids(const CircuitSpec& spec) {
    std::vector<std::string> v;
    for (const auto& m : spec.metrics) v.push_back(m.id);
    return v;
}

std::vector<std::string> substructure_ids(const CircuitSpec& spec) {
    return {spec.substructure_tags.begin(), spec.substructure_tags.end()};
}

std::string definition_text(const CircuitSpec& spec, const std::string& netlist) {
    std::ostringstream s;
    s << "## Circuit definition\n";
    s << "Circuit: " << spec.circuit_id << "\n";
    s << "Sub-structures: " << join(substructure_ids(spec), ", ") << "\n";
    s << "Design parameters:\n";
    for (const auto& p : spec.params) {
        s << "- " << p.id << " in [" << num(p.lo) << ", " << num(p.hi) << "]";
        if (!p.unit.empty()) s << " " << p.unit;
        s << " (sub-structure " << p.substructure << ")\n";
    }
    s << "Netlist:\n" << (netlist.empty() ? std::string("(not provided)\n") : netlist);
    if (!netlist.empty() && netlist.back() != '\n') s << "\n";
    return s.str();
}

std::string objectives_text(const CircuitSpec& spec) {
    std::ostringstream s;
    s << "## Design objectives\n";
    for (const auto& m : spec.metrics) {
        s << "- " << m.id << ": "
          << (m.goal == Goal::Maximize ? "maximize, target >= " : "minimize, target <= ")
          << num(m.threshold) << " (scale " << num(m.scale) << ")\n";
    }
    s << "Figure of merit: sum over metrics of value/scale, negated for minimized metrics.\n";
    return s.str();
}

std::string point_text(const CircuitSpec& spec, const DesignPoint& x) {
    std::vector<std::string> parts;
    for (const auto& p : spec.params) {
        auto it = x.values.find(p.id);
        parts.push_back(p.id + "=" + (it == x.values.end() ? std::string("?") : num(it->second)));
    }
    return join(parts, ", ");
}

std::string metrics_text(const CircuitSpec& spec, const EvaluationRecord& r) {
    if (!r.valid) return "simulation failed";
    std::vector<std::string> parts;
    for (const auto& m : spec.metrics) {
        auto it = r.metrics.find(m.id);
        parts.push_back(m.id + "=" + (it == r.metrics.end() ? std::string("?") : num(it->second)));
    }
    return join(parts, ", ");
}

std::string demonstrations_text(const CircuitSpec& spec, const std::vector<EvaluationRecord>& demos) {
    std::ostringstream s;
    s << "## Demonstrations\n";
    if (demos.empty()) {
        s << "(none yet)\n";
        return s.str();
    }
    for (std::size_t i = 0; i < demos.size(); ++i) {
        s << "Example " << i + 1 << "\n";
        s << "Parameter values: " << point_text(spec, demos[i].point) << "\n";
        s << "Corresponding performance metrics: " << metrics_text(spec, demos[i]) << "\n";
    }
    return s.str();
}

json spec_payload(const CircuitSpec& spec) {
    json params = json::array();
    for (const auto& p : spec.params)
        params.push_back({{"id", p.id}, {"lo", p.lo}, {"hi", p.hi}, {"substructure", p.substructure}});
    json metrics = json::array();
    for (const auto& m : spec.metrics)
        metrics.push_back({{"id", m.id},
                           {"goal", m.goal == Goal::Maximize ? "maximize" : "minimize"},
                           {"threshold", m.threshold}});
    return {{"circuit_id", spec.circuit_id},
            {"params", params},
            {"metrics", metrics},
            {"substructures", substructure_ids(spec)}};
}

json demos_payload(const std::vector<EvaluationRecord>& demos) {
    json out = json::array();
    for (const auto& d : demos) {
        json m = json::object();
        for (const auto& [k, v] : d.metrics) m[k] = v;
        json p = json::object();
        for (const auto& [k, v] : d.point.values) p[k] = v;
        out.push_back({{"point", p}, {"metrics", m}, {"valid", d.valid}});
    }
    return out;
}

constexpr const char* kWorkingSystem =
    "You are an expert analog circuit designer helping a numerical optimizer size a circuit.";
constexpr const char* kCritiqueSystem =
    "You are a senior analog circuit design reviewer checking design knowledge for errors.";

}  // namespace

const PromptSection* PromptBundle::find(const std::string& label) const {
    for (const auto& s : sections)
        if (s.label == label) return &s;
    return nullptr;
}

std::string PromptBundle::user_text() const {
    std::string out;
    for (std::size_t i = 0; i < sections.size(); ++i) {
        if (i) out += "\n";
        out += sections[i].text;
    }
    return out;
}

std::string PromptBundle::kind() const {
    if (payload.is_object() && payload.contains("kind") && payload["kind"].is_string())
        return payload["kind"].get<std::string>();
    return {};
}

PromptBundle build_suggestion_prompt(const CircuitSpec& spec, const std::string& netlist,
                                     const std::vector<EvaluationRecord>& demos,
                                     const ContextDocument* reuse, std::size_t n_points,
                                     const std::string& request_tag) {
    if (n_points < 1) throw Error(ErrorKind::InvalidArgument, "n_points must be >= 1");
    PromptBundle b;
    b.system = kWorkingSystem;
    b.sections.push_back({section::kDefinition, definition_text(spec, netlist)});
    b.sections.push_back({section::kObjectives, objectives_text(spec)});
    std::string reuse_text = "## Reuse context\n";
    if (reuse && !reuse->text.empty()) {
        reuse_text += reuse->text;
        if (reuse_text.back() != '\n') reuse_text += "\n";
    } else {
        reuse_text += "(none)\n";
    }
    b.sections.push_back({section::kReuse, reuse_text});
    b.sections.push_back({section::kDemonstrations, demonstrations_text(spec, demos)});

    std::ostringstream ins;
    ins << "## Task\n";
    if (!request_tag.empty()) ins << request_tag << "\n";
    ins << "Propose exactly " << n_points << " new candidate design point"
        << (n_points == 1 ? "" : "s")
        << " expected to improve the figure of merit while respecting the parameter ranges.\n";
    ins << "Reply with a JSON array of " << n_points << " object" << (n_points == 1 ? "" : "s")
        << " mapping every parameter id to a number, for example:\n[{";
    for (std::size_t i = 0; i < spec.params.size(); ++i) {
        if (i) ins << ", ";
        ins << "\"" << spec.params[i].id << "\": " << num(spec.params[i].center());
    }
    ins << "}]\n";
    b.sections.push_back({section::kInstruction, ins.str()});

    b.payload = spec_payload(spec);
    b.payload["kind"] = request::kSuggest;
    b.payload["n_points"] = n_points;
    b.payload["tag"] = request_tag;
    b.payload["demos"] = demos_payload(demos);
    b.payload["reuse"] = reuse ? reuse->text : std::string();
    return b;
}

std::vector<PromptBundle> build_summary_prompts(const CircuitSpec& spec,
                                                const std::string& netlist,
                                                const std::vector<EvaluationRecord>& demos) {
    const std::string metrics = join(metric_ids(spec), ", ");
    const std::string subs = join(substructure_ids(spec), ", ");
    const std::string ids_hint = "Use only these ids. Metrics: " + metrics +
                                 ". Sub-structures: " + subs + ".\n";
    const std::string format_hint =
        "Write one record per line and nothing else on those lines; a short explanation may "
        "follow in double quotes.\n";

    struct Spec {
        const char* kind;
        std::string text;
    };
    const std::vector<Spec> asks = {
        {request::kTradeoffs,
         "## Task\nIdentify pairs of performance metrics that trade off against each other, as "
         "tuples (P1, P2).\n" + ids_hint + format_hint +
             "Record form:\nTRADEOFF <P1> <P2> \"explanation\"\n"},
        {request::kAssociations,
         "## Task\nFor each sub-structure (" + subs +
             "), list the performance metrics or metric trade-offs it mainly affects.\n" +
             ids_hint + format_hint +
             "Record forms:\nASSOC <substructure> METRIC <metric> \"explanation\"\n"
             "ASSOC <substructure> TRADEOFF <metric1> <metric2> \"explanation\"\n"},
        {request::kInfluences,
         "## Task\nFor each design parameter, state how increasing it changes the metrics it "
         "affects through its sub-structure (" + subs +
             "). Use + for increase, - for decrease, ~ for non-monotonic.\n" + ids_hint +
             format_hint + "Record form:\nINFL <param> IN <substructure> ON <metric> DIR <+|-|~> "
             "\"explanation\"\n"},
    };

    std::vector<PromptBundle> out;
    for (const auto& a : asks) {
        PromptBundle b;
        b.system = kWorkingSystem;
        b.sections.push_back({section::kDefinition, definition_text(spec, netlist)});
        b.sections.push_back({section::kObjectives, objectives_text(spec)});
        b.sections.push_back({section::kDemonstrations, demonstrations_text(spec, demos)});
        b.sections.push_back({section::kInstruction, a.text});
        b.payload = spec_payload(spec);
        b.payload["kind"] = a.kind;
        b.payload["demos"] = demos_payload(demos);
        out.push_back(std::move(b));
    }
    return out;
}

PromptBundle build_critique_prompt(const KnowledgeSummary& k, const CircuitSpec& spec,
                                   const std::string& netlist) {
    const std::string doc = serialize_summary(k);
    PromptBundle b;
    b.system = kCritiqueSystem;
    b.sections.push_back({section::kDefinition, definition_text(spec, netlist)});
    b.sections.push_back(
        {section::kInstruction,
         "## Task\nReview the knowledge summary below for records that contradict the circuit "
         "or each other and correct them. Keep records that are right. Reply with the complete "
         "corrected summary as a KS/1 document whose first line is KS/1.\n\n" + doc});
    b.payload = spec_payload(spec);
    b.payload["kind"] = request::kCritique;
    b.payload["summary"] = doc;
    return b;
}

std::size_t estimate_tokens(const PromptBundle& bundle) noexcept {
    std::size_t chars = utf8_length(bundle.system);
    for (const auto& s : bundle.sections) chars += utf8_length(s.text);
    return chars / 4;
}

namespace {

// Drops code points from the tail of `text` until it loses `excess` of them,
// keeping the first line (the section header).
std::size_t cut_tail(std::string& text, std::size_t excess) {
    static const std::string marker = "[truncated]\n";
    const std::size_t header_end = text.find('\n');
    const std::size_t keep_min = header_end == std::string::npos ? text.size() : header_end + 1;
    std::size_t len = text.size();
    std::size_t removed = 0;
    while (len > keep_min && removed < excess + marker.size()) {
        --len;
        while (len > keep_min && (static_cast<unsigned char>(text[len]) & 0xC0) == 0x80) --len;
        ++removed;
    }
    if (len == text.size()) return 0;
    text.resize(len);
    if (!text.empty() && text.back() != '\n') text += "\n";
    text += marker;
    return removed > marker.size() ? removed - marker.size() : 0;
}

}  // namespace

bool fit_to_context_window(PromptBundle& bundle, int context_window_tokens) {
    const std::size_t budget = static_cast<std::size_t>(std::max(context_window_tokens, 1));
    bool cut = false;
    for (const char* label : {section::kReuse, section::kDemonstrations}) {
        const std::size_t tokens = estimate_tokens(bundle);
        if (tokens <= budget) break;
        for (auto& s : bundle.sections) {
            if (s.label != label) continue;
            if (cut_tail(s.text, (tokens - budget) * 4 + 4) > 0) cut = true;
        }
    }
    return cut;
}

// ---------------------------------------------------------------------------
// Suggestions

namespace {

// Index one past the bracket that closes the array opened at `open`, or npos.
std::size_t match_bracket(const std::string& s, std::size_t open) {
    int depth = 0;
    bool in_str = false;
    for (std::size_t i = open; i < s.size(); ++i) {
        const char c = s[i];
        if (in_str) {
            if (c == '\\') ++i;
            else if (c == '"') in_str = false;
            continue;
        }
        if (c == '"') in_str = true;
        else if (c == '[' || c == '{') ++depth;
        else if (c == ']' || c == '}') {
            if (--depth == 0) return i + 1;
        }
    }
    return std::string::npos;
}

std::optional<double> coerce_number(const json& v) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        char* end = nullptr;
        const double d = std::strtod(s.c_str(), &end);
        if (!s.empty() && end == s.c_str() + s.size()) return d;
    }
    return std::nullopt;
}

}  // namespace

ParsedSuggestions parse_suggestions(const std::string& text, const CircuitSpec& spec,
                                    std::size_t n_expected) {
    std::optional<json> array;
    for (std::size_t pos = text.find('['); pos != std::string::npos; pos = text.find('[', pos + 1)) {
        const std::size_t end = match_bracket(text, pos);
        if (end == std::string::npos) continue;
        json j = json::parse(text.begin() + static_cast<std::ptrdiff_t>(pos),
                             text.begin() + static_cast<std::ptrdiff_t>(end), nullptr, false);
        if (j.is_discarded() || !j.is_array()) continue;
        if (std::none_of(j.begin(), j.end(), [](const json& e) { return e.is_object(); })) continue;
        array = std::move(j);
        break;
    }
    if (!array) throw Error(ErrorKind::NoParseableSuggestion, "no JSON array of parameter maps");

    ParsedSuggestions out;
    for (const json& e : *array) {
        if (n_expected > 0 && out.points.size() >= n_expected) break;
        if (!e.is_object()) {
            ++out.dropped;
            continue;
        }
        DesignPoint x;
        bool ok = true;
        for (const auto& p : spec.params) {
            auto it = e.find(p.id);
            std::optional<double> v;
            if (it != e.end()) v = coerce_number(*it);
            if (!v || !std::isfinite(*v)) {
                ok = false;
                break;
            }
            x.values[p.id] = *v;
        }
        if (!ok) {
            ++out.dropped;
            continue;
        }
        out.clipped.push_back(spec.clip(x));
        out.points.push_back(std::move(x));
    }
    if (out.points.empty())
        throw Error(ErrorKind::NoParseableSuggestion, "no usable design point in the response");
    return out;
}

// ---------------------------------------------------------------------------
// HTTP client

AdvisorClient::~AdvisorClient() = default;

HttpChatClient::HttpChatClient(AdvisorConfig config) : config_(std::move(config)) {
    config_.validate();
    if (config_.endpoint.empty())
        throw Error(ErrorKind::Config, "advisor endpoint is empty");
}

json HttpChatClient::build_request(const AdvisorConfig& cfg, const PromptBundle& p) {
    return {{"model", cfg.model_name},
            {"messages",
             json::array({{{"role", "system"}, {"content", p.system}},
                          {{"role", "user"}, {"content", p.user_text()}}})},
            {"temperature", cfg.temperature},
            {"max_tokens", cfg.max_tokens}};
}

std::string HttpChatClient::extract_content(const std::string& body) {
    const json j = json::parse(body, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorKind::Runtime, "advisor reply is not JSON");
    try {
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        throw Error(ErrorKind::Runtime, "advisor reply lacks choices[0].message.content");
    }
}

namespace {

struct Url {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

Url split_url(const std::string& endpoint) {
    const auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos)
        throw Error(ErrorKind::Config, "advisor endpoint must start with http:// or https://");
    const std::string scheme = endpoint.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https")
        throw Error(ErrorKind::Config, "unsupported advisor endpoint scheme '" + scheme + "'");
    const auto path_start = endpoint.find('/', scheme_end + 3);
    Url u;
    u.origin = endpoint.substr(0, path_start);
    u.path = path_start == std::string::npos ? "/" : endpoint.substr(path_start);
    return u;
}

}  // namespace

std::string HttpChatClient::do_complete(const PromptBundle& prompt) {
    const Url url = split_url(config_.endpoint);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (url.origin.rfind("https://", 0) == 0)
        throw Error(ErrorKind::AdvisorUnavailable, "this build has no TLS support for https endpoints");
#endif
    const std::string body = build_request(config_, prompt).dump();
    httplib::Headers headers;
    if (const char* key = std::getenv(kApiKeyEnv); key && *key)
        headers.emplace("Authorization", std::string("Bearer ") + key);

    const auto secs = static_cast<time_t>(config_.timeout_s);
    const auto usecs = static_cast<time_t>((config_.timeout_s - static_cast<double>(secs)) * 1e6);
    std::string last_error;
    for (int attempt = 0; attempt < config_.max_retries; ++attempt) {
        if (attempt > 0) {
            const double wait = config_.backoff_base_s * std::ldexp(1.0, attempt - 1);
            std::this_thread::sleep_for(std::chrono::duration<double>(wait));
        }
        httplib::Client cli(url.origin);
        cli.set_connection_timeout(secs, usecs);
        cli.set_read_timeout(secs, usecs);
        cli.set_write_timeout(secs, usecs);
        auto res = cli.Post(url.path, headers, body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP status " + std::to_string(res->status);
            continue;
        }
        try {
            return extract_content(res->body);
        } catch (const Error& e) {
            last_error = e.what();
        }
    }
    throw Error(ErrorKind::AdvisorUnavailable,
                "advisor gave up after " + std::to_string(config_.max_retries) +
                    " attempts: " + last_error);
}

// ---------------------------------------------------------------------------
// Mock advisor

std::optional<MockPolicy> mock_policy_from_string(const std::string& s) {
    if (s == "PERTURB" || s == "perturb") return MockPolicy::Perturb;
    if (s == "KNOWLEDGE_GUIDED" || s == "knowledge_guided") return MockPolicy::KnowledgeGuided;
    if (s == "FIXED_SCRIPT" || s == "fixed_script") return MockPolicy::FixedScript;
    return std::nullopt;
}

const char* to_string(MockPolicy p) noexcept {
    switch (p) {
        case MockPolicy::Perturb: return "PERTURB";
        case MockPolicy::KnowledgeGuided: return "KNOWLEDGE_GUIDED";
        case MockPolicy::FixedScript: return "FIXED_SCRIPT";
    }
    return "?";
}

MockScript load_mock_script(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open mock script '" + path + "'");
    const json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw Error(ErrorKind::Config, "mock script '" + path + "' must be a JSON object");
    MockScript script;
    for (const auto& [kind, list] : j.items()) {
        if (!list.is_array()) throw Error(ErrorKind::Config, "mock script entry '" + kind + "' must be a list");
        for (const auto& r : list) {
            if (!r.is_string())
                throw Error(ErrorKind::Config, "mock script entry '" + kind + "' must hold strings");
            script[kind].push_back(r.get<std::string>());
        }
    }
    return script;
}

MockAdvisor::MockAdvisor(MockOptions options) : options_(std::move(options)) {}

std::string MockAdvisor::do_complete(const PromptBundle& prompt) {
    const std::string kind = prompt.kind();
    if (options_.policy == MockPolicy::FixedScript) {
        auto it = options_.script.find(kind);
        if (it != options_.script.end() && !it->second.empty()) {
            std::lock_guard lock(mutex_);
            std::size_t& c = cursor_[kind];
            const std::string& reply = it->second[c % it->second.size()];
            ++c;
            return reply;
        }
    }
    if (kind == request::kSuggest) return suggest(prompt);
    if (kind == request::kCritique) return critique(prompt);
    if (kind == request::kTradeoffs || kind == request::kAssociations || kind == request::kInfluences)
        return summarize(prompt);
    return "I do not understand the request.";
}

namespace {

struct MockParam {
    std::string id;
    double lo, hi;
    std::string substructure;
};

struct MockMetric {
    std::string id;
    bool maximize;
    double threshold;
};

std::vector<MockParam> payload_params(const json& p) {
    std::vector<MockParam> out;
    for (const auto& e : p.at("params"))
        out.push_back({e.at("id").get<std::string>(), e.at("lo").get<double>(),
                       e.at("hi").get<double>(), e.at("substructure").get<std::string>()});
    return out;
}

std::vector<MockMetric> payload_metrics(const json& p) {
    std::vector<MockMetric> out;
    for (const auto& e : p.at("metrics"))
        out.push_back({e.at("id").get<std::string>(), e.at("goal").get<std::string>() == "maximize",
                       e.at("threshold").get<double>()});
    return out;
}

}  // namespace

std::string MockAdvisor::suggest(const PromptBundle& prompt) const {
    const json& p = prompt.payload;
    const auto params = payload_params(p);
    const auto metrics = payload_metrics(p);
    const std::size_t n = p.value("n_points", std::size_t{1});
    const json& demos = p.at("demos");

    // Base point: best demonstration, or the box center without one.
    std::map<std::string, double> base;
    const json* best = nullptr;
    for (const auto& d : demos)
        if (d.value("valid", false)) {
            best = &d;
            break;
        }
    for (const auto& q : params)
        base[q.id] = best ? best->at("point").value(q.id, 0.5 * (q.lo + q.hi)) : 0.5 * (q.lo + q.hi);

    // Net vote per parameter from reuse-context influences on under-spec metrics.
    std::map<std::string, int> vote;
    if (options_.policy == MockPolicy::KnowledgeGuided) {
        std::set<std::string> under;
        for (const auto& m : metrics) {
            bool met = false;
            if (best && best->at("metrics").contains(m.id)) {
                const double v = best->at("metrics").at(m.id).get<double>();
                met = m.maximize ? v >= m.threshold : v <= m.threshold;
            }
            if (!met) under.insert(m.id);
        }
        const auto lp = parse_records_lenient(p.value("reuse", std::string()), "reuse_context");
        for (const auto& r : lp.summary.influences()) {
            if (!under.count(r.metric) || r.direction == Direction::NonMonotonic) continue;
            const auto q = std::find_if(params.begin(), params.end(), [&](const MockParam& x) {
                return x.id == r.param && x.substructure == r.substructure;
            });
            if (q == params.end()) continue;
            const auto m = std::find_if(metrics.begin(), metrics.end(),
                                        [&](const MockMetric& x) { return x.id == r.metric; });
            const bool up = (r.direction == Direction::Positive) == m->maximize;
            vote[r.param] += up ? 1 : -1;
        }
    }

    std::mt19937_64 rng(mix_seed(options_.seed, fnv1a(prompt.user_text())));
    std::normal_distribution<double> gauss(0.0, 1.0);
    json out = json::array();
    for (std::size_t i = 0; i < n; ++i) {
        json pt = json::object();
        for (const auto& q : params) {
            const double range = q.hi - q.lo;
            const auto v = vote.find(q.id);
            double x;
            if (v != vote.end() && v->second != 0) {
                x = base[q.id] + (v->second > 0 ? 0.1 : -0.1) * range;
            } else {
                x = base[q.id] + 0.05 * range * gauss(rng);
            }
            pt[q.id] = std::clamp(x, q.lo, q.hi);
        }
        out.push_back(pt);
    }
    return "Suggested design points:\n" + out.dump() + "\n";
}

std::string MockAdvisor::summarize(const PromptBundle& prompt) const {
    const json& p = prompt.payload;
    const std::string kind = prompt.kind();
    const auto params = payload_params(p);
    const auto metrics = payload_metrics(p);
    std::set<std::string> subs;
    for (const auto& s : p.at("substructures")) subs.insert(s.get<std::string>());
    auto has_metric = [&](const std::string& id) {
        return std::any_of(metrics.begin(), metrics.end(), [&](const MockMetric& m) { return m.id == id; });
    };
    auto has_param = [&](const std::string& id, const std::string& sub) {
        return std::any_of(params.begin(), params.end(), [&](const MockParam& q) {
            return q.id == id && q.substructure == sub;
        });
    };

    std::vector<std::string> lines;
    if (options_.knowledge) {
        const KnowledgeSummary& k = *options_.knowledge;
        if (kind == request::kTradeoffs) {
            for (const auto& r : k.tradeoffs())
                if (has_metric(r.metric_a()) && has_metric(r.metric_b())) lines.push_back(format_record(r));
        } else if (kind == request::kAssociations) {
            for (const auto& r : k.associations()) {
                const auto ms = r.metrics();
                if (subs.count(r.substructure()) && std::all_of(ms.begin(), ms.end(), has_metric))
                    lines.push_back(format_record(r));
            }
        } else {
            for (const auto& r : k.influences())
                if (has_param(r.param, r.substructure) && has_metric(r.metric))
                    lines.push_back(format_record(r));
        }
    } else if (kind == request::kTradeoffs) {
        const MockMetric* mx = nullptr;
        const MockMetric* mn = nullptr;
        for (const auto& m : metrics) {
            if (m.maximize && !mx) mx = &m;
            if (!m.maximize && !mn) mn = &m;
        }
        if (mx && mn) {
            lines.push_back(format_record(TradeoffRecord(mx->id, mn->id)));
        } else if (metrics.size() >= 2) {
            lines.push_back(format_record(TradeoffRecord(metrics[0].id, metrics[1].id)));
        }
    } else if (kind == request::kAssociations) {
        for (const auto& s : subs)
            for (const auto& m : metrics)
                lines.push_back(format_record(AssociationRecord::to_metric(s, m.id)));
    } else {
        // Influence signs from the covariance across demonstrations.
        std::vector<const json*> demos;
        for (const auto& d : p.at("demos"))
            if (d.value("valid", false)) demos.push_back(&d);
        if (demos.size() >= 2) {
            for (const auto& q : params) {
                for (const auto& m : metrics) {
                    double sx = 0, sy = 0, sxy = 0;
                    for (const json* d : demos) {
                        const double x = d->at("point").at(q.id).get<double>();
                        const double y = d->at("metrics").at(m.id).get<double>();
                        sx += x;
                        sy += y;
                        sxy += x * y;
                    }
                    const double nd = static_cast<double>(demos.size());
                    const double cov = sxy / nd - (sx / nd) * (sy / nd);
                    const double tol = 1e-12 * (1.0 + std::abs(sxy / nd));
                    if (std::abs(cov) <= tol) continue;
                    lines.push_back(format_record(InfluenceRecord{
                        q.id, q.substructure, m.id,
                        cov > 0 ? Direction::Positive : Direction::Negative, ""}));
                }
            }
        }
    }
    std::string out = "Records:\n";
    for (const auto& l : lines) out += l + "\n";
    return out;
}

std::string MockAdvisor::critique(const PromptBundle& prompt) const {
    if (options_.critique == MockCritique::Garbage)
        return "I am not able to review this summary right now.";
    KnowledgeSummary k;
    try {
        k = parse_summary(prompt.payload.value("summary", std::string()));
    } catch (const Error&) {
        return "The summary could not be read.";
    }
    if (options_.critique == MockCritique::AnnotateOne) {
        KnowledgeSummary a(k.circuit_id());
        a.set_provenance(k.provenance());
        a.set_iteration(k.iteration());
        for (const auto& r : k.tradeoffs()) a.add(r);
        for (const auto& r : k.associations()) a.add(r);
        bool done = false;
        for (InfluenceRecord r : k.influences()) {
            if (!done && r.note.empty()) {
                r.note = "checked against the netlist";
                done = true;
            }
            a.add(std::move(r));
        }
        k = std::move(a);
    }
    return "Refined summary:\n```\n" + serialize_summary(k) + "```\n";
}

// ---------------------------------------------------------------------------
// Transcripts

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[40];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[48];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

}  // namespace

std::size_t TranscriptLog::append(AdvisorTranscript t) {
    std::lock_guard lock(mutex_);
    entries_.push_back(std::move(t));
    return entries_.size() - 1;
}

void TranscriptLog::set_outcome(std::size_t index, std::string outcome) {
    std::lock_guard lock(mutex_);
    if (index >= entries_.size()) throw Error(ErrorKind::InvalidArgument, "transcript index out of range");
    entries_[index].outcome = std::move(outcome);
}

std::size_t TranscriptLog::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

std::vector<AdvisorTranscript> TranscriptLog::entries() const {
    std::lock_guard lock(mutex_);
    return entries_;
}

std::size_t TranscriptLog::count(AdvisorRole role, const std::string& purpose) const {
    std::lock_guard lock(mutex_);
    return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(), [&](const auto& t) {
        return t.role == role && (purpose.empty() || t.purpose == purpose);
    }));
}

std::string TranscriptLog::to_jsonl(bool include_timestamps) const {
    std::lock_guard lock(mutex_);
    std::string out;
    for (const auto& t : entries_) {
        json sections = json::array();
        for (const auto& s : t.request.sections) sections.push_back({{"label", s.label}, {"text", s.text}});
        json row = {{"role", to_string(t.role)},
                    {"purpose", t.purpose},
                    {"kind", t.request.kind()},
                    {"system", t.request.system},
                    {"sections", sections},
                    {"raw_response", t.raw_response},
                    {"outcome", t.outcome}};
        if (include_timestamps) row["timestamp"] = t.timestamp;
        out += row.dump() + "\n";
    }
    return out;
}

void TranscriptLog::export_jsonl(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    f << to_jsonl(true);
    if (!f) throw Error(ErrorKind::Io, "cannot write transcripts to '" + path + "'");
}

// ---------------------------------------------------------------------------
// Advisor

Advisor::Advisor(std::shared_ptr<AdvisorClient> client, AdvisorConfig config,
                 std::shared_ptr<TranscriptLog> log)
    : client_(std::move(client)), config_(std::move(config)), log_(std::move(log)) {
    if (!client_) throw Error(ErrorKind::InvalidArgument, "advisor needs a client");
    if (!log_) log_ = std::make_shared<TranscriptLog>();
}

Advisor::Reply Advisor::ask(PromptBundle prompt, const std::string& purpose) {
    std::lock_guard lock(in_flight_);
    const bool truncated = fit_to_context_window(prompt, config_.context_window);
    AdvisorTranscript t;
    t.role = config_.role;
    t.purpose = purpose;
    t.timestamp = utc_now();
    try {
        std::string text = client_->complete(prompt);
        t.request = std::move(prompt);
        t.raw_response = text;
        t.outcome = truncated ? "OK TRUNCATED" : "OK";
        const std::size_t idx = log_->append(std::move(t));
        return {std::move(text), idx};
    } catch (const Error& e) {
        t.request = std::move(prompt);
        t.outcome = std::string("UNAVAILABLE: ") + e.what();
        log_->append(std::move(t));
        if (e.kind() == ErrorKind::AdvisorUnavailable) throw;
        throw Error(ErrorKind::AdvisorUnavailable, e.what());
    } catch (const std::exception& e) {
        t.request = std::move(prompt);
        t.outcome = std::string("UNAVAILABLE: ") + e.what();
        log_->append(std::move(t));
        throw Error(ErrorKind::AdvisorUnavailable, e.what());
    }
}

void Advisor::set_outcome(std::size_t transcript, std::string outcome) {
    log_->set_outcome(transcript, std::move(outcome));
}

// ---------------------------------------------------------------------------
// Knowledge generation

SummaryResult generate_summary(Advisor& working, const CircuitSpec& spec,
                               const std::string& netlist,
                               const std::vector<EvaluationRecord>& demos,
                               std::size_t iteration) {
    SummaryResult out;
    out.summary = KnowledgeSummary(spec.circuit_id);
    for (PromptBundle& p : build_summary_prompts(spec, netlist, demos)) {
        const std::string kind = p.kind();
        const Advisor::Reply reply = working.ask(std::move(p), kind);
        const LenientParse lp = parse_records_lenient(reply.text, spec.circuit_id);
        out.skipped_lines += lp.skipped;
        out.summary.merge(lp.summary);
        working.set_outcome(reply.transcript, "RECORDS " + std::to_string(lp.summary.record_count()) +
                                                  " SKIPPED " + std::to_string(lp.skipped));
    }
    out.summary.set_provenance(Provenance::Generated);
    out.summary.set_iteration(iteration);
    if (out.summary.empty()) out.warnings.push_back("knowledge summary is empty");
    for (const auto& line : validate_summary(out.summary, spec).lines())
        out.warnings.push_back(line);
    return out;
}

namespace {

// The KS/1 document inside a chat reply: from the first `KS/1` line up to a
// closing code fence or the end.
std::optional<std::string> extract_document(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::string doc;
    bool inside = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!inside) {
            if (line == "KS/1") {
                inside = true;
                doc = "KS/1\n";
            }
            continue;
        }
        if (line.rfind("```", 0) == 0) break;
        doc += line + "\n";
    }
    if (!inside) return std::nullopt;
    return doc;
}

}  // namespace

SummaryResult critique_summary(Advisor& critique, const KnowledgeSummary& k,
                               const CircuitSpec& spec, const std::string& netlist) {
    SummaryResult out;
    out.summary = k;
    Advisor::Reply reply;
    try {
        reply = critique.ask(build_critique_prompt(k, spec, netlist), request::kCritique);
    } catch (const Error& e) {
        out.warnings.push_back(std::string("critique skipped: ") + e.what());
        return out;
    }
    const auto doc = extract_document(reply.text);
    if (!doc) {
        out.warnings.push_back("critique reply holds no KS/1 document; summary kept");
        critique.set_outcome(reply.transcript, "UNPARSEABLE");
        return out;
    }
    KnowledgeSummary refined;
    try {
        refined = parse_summary(*doc);
    } catch (const ParseError& e) {
        out.warnings.push_back("critique reply line " + std::to_string(e.line()) + ": " + e.reason() +
                               "; summary kept");
        critique.set_outcome(reply.transcript, "UNPARSEABLE");
        return out;
    }
    if (refined.circuit_id() != k.circuit_id()) {
        out.warnings.push_back("critique reply names circuit '" + refined.circuit_id() +
                               "'; summary kept");
        critique.set_outcome(reply.transcript, "WRONG_CIRCUIT");
        return out;
    }
    refined.set_provenance(Provenance::Refined);
    refined.set_iteration(k.iteration());
    for (const auto& line : validate_summary(refined, spec).lines()) out.warnings.push_back(line);
    critique.set_outcome(reply.transcript, "REFINED " + std::to_string(refined.record_count()));
    out.summary = std::move(refined);
    return out;
}

}  // namespace uso
