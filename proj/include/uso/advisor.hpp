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

#ifndef USO_ADVISOR_HPP
#define USO_ADVISOR_HPP

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "uso/buffer.hpp"
#include "uso/circuit_spec.hpp"
#include "uso/knowledge.hpp"

namespace uso {

enum class AdvisorRole { Working, Critique };

const char* to_string(AdvisorRole r) noexcept;

inline constexpr const char* kApiKeyEnv = "USO_ADVISOR_API_KEY";

struct AdvisorConfig {
    std::string endpoint;  // e.g. https://api.openai.com/v1/chat/completions
    std::string model_name = "gpt-3.5-turbo";
    double temperature = 0.5;
    int max_tokens = 1000;
    int context_window = 16000;  // tokens, estimated as chars / 4
    AdvisorRole role = AdvisorRole::Working;
    double timeout_s = 60.0;
    int max_retries = 3;          // total attempts
    double backoff_base_s = 1.0;  // waits base, 2*base, 4*base, ...

    static AdvisorConfig working_default();
    static AdvisorConfig critique_default();
    void validate() const;
};

// ---------------------------------------------------------------------------
// Prompts

namespace section {
inline constexpr const char* kDefinition = "definition";
inline constexpr const char* kObjectives = "objectives";
inline constexpr const char* kReuse = "reuse";
inline constexpr const char* kDemonstrations = "demonstrations";
inline constexpr const char* kInstruction = "instruction";
}  // namespace section

/// Request kinds carried in PromptBundle::payload["kind"].
namespace request {
inline constexpr const char* kSuggest = "suggest";
inline constexpr const char* kTradeoffs = "summary_tradeoffs";
inline constexpr const char* kAssociations = "summary_associations";
inline constexpr const char* kInfluences = "summary_influences";
inline constexpr const char* kCritique = "critique";
}  // namespace request

struct PromptSection {
    std::string label;
    std::string text;

    bool operator==(const PromptSection&) const = default;
};

/// Sections are always in the order definition, objectives, reuse,
/// demonstrations, instruction. Summary prompts omit reuse; critique
/// prompts keep only definition and instruction.
/// `payload` is a machine-readable mirror of the request for in-process
/// advisors; it is never put on the wire.
struct PromptBundle {
    std::string system;
    std::vector<PromptSection> sections;
    nlohmann::json payload;

    const PromptSection* find(const std::string& label) const;
    std::string user_text() const;
    std::string kind() const;
};

PromptBundle build_suggestion_prompt(const CircuitSpec& spec, const std::string& netlist,
                                     const std::vector<EvaluationRecord>& demos,
                                     const ContextDocument* reuse, std::size_t n_points,
                                     const std::string& request_tag = {});

std::vector<PromptBundle> build_summary_prompts(const CircuitSpec& spec,
                                                const std::string& netlist,
                                                const std::vector<EvaluationRecord>& demos);

PromptBundle build_critique_prompt(const KnowledgeSummary& k, const CircuitSpec& spec,
                                   const std::string& netlist);

/// Truncates tail-first (reuse before demonstrations) until the estimated
/// token count fits. Returns true if anything was cut.
bool fit_to_context_window(PromptBundle& bundle, int context_window_tokens);

std::size_t estimate_tokens(const PromptBundle& bundle) noexcept;

// ---------------------------------------------------------------------------
// Suggestions

struct ParsedSuggestions {
    std::vector<DesignPoint> points;
    std::vector<bool> clipped;
    std::size_t dropped = 0;
};

/// First JSON array of parameter maps in `text`. Numeric strings are coerced,
/// out-of-bounds values clipped (and flagged), entries missing a parameter or
/// holding a non-finite value dropped. Throws Error(NoParseableSuggestion)
/// when nothing survives.
ParsedSuggestions parse_suggestions(const std::string& text, const CircuitSpec& spec,
                                    std::size_t n_expected);

// ---------------------------------------------------------------------------
// Clients

/// Chat-completion style client. Implementations throw
/// Error(AdvisorUnavailable) once they give up.
class AdvisorClient {
public:
    virtual ~AdvisorClient();

    std::string complete(const PromptBundle& prompt) { return do_complete(prompt); }

private:
    virtual std::string do_complete(const PromptBundle& prompt) = 0;
};

/// OpenAI-compatible HTTP endpoint. Reads the bearer token from
/// USO_ADVISOR_API_KEY when set.
class HttpChatClient : public AdvisorClient {
public:
    explicit HttpChatClient(AdvisorConfig config);

    static nlohmann::json build_request(const AdvisorConfig& cfg, const PromptBundle& p);
    /// choices[0].message.content; throws Error(Runtime) on a malformed body.
    static std::string extract_content(const std::string& body);

private:
    std::string do_complete(const PromptBundle& prompt) override;

    AdvisorConfig config_;
};

enum class MockPolicy { Perturb, KnowledgeGuided, FixedScript };
enum class MockCritique { Identity, AnnotateOne, Garbage };

std::optional<MockPolicy> mock_policy_from_string(const std::string& s);
const char* to_string(MockPolicy p) noexcept;

/// Canned responses by request kind; each list is replayed in order and
/// wraps around.
using MockScript = std::map<std::string, std::vector<std::string>>;

MockScript load_mock_script(const std::string& path);

struct MockOptions {
    MockPolicy policy = MockPolicy::Perturb;
    std::uint64_t seed = 0;
    /// Records the mock "knows" about circuits; reported by summary requests
    /// whenever they reference the requested circuit's ids.
    std::optional<KnowledgeSummary> knowledge;
    MockCritique critique = MockCritique::Identity;
    MockScript script;
};

/// Deterministic offline advisor. Responses depend only on the seed and
/// the prompt (FIXED_SCRIPT: on the call sequence), never on wall time.
class MockAdvisor : public AdvisorClient {
public:
    explicit MockAdvisor(MockOptions options);

    const MockOptions& options() const noexcept { return options_; }

private:
    std::string do_complete(const PromptBundle& prompt) override;

    std::string suggest(const PromptBundle& prompt) const;
    std::string summarize(const PromptBundle& prompt) const;
    std::string critique(const PromptBundle& prompt) const;

    MockOptions options_;
    std::mutex mutex_;
    std::map<std::string, std::size_t> cursor_;
};

// ---------------------------------------------------------------------------
// Transcripts

struct AdvisorTranscript {
    AdvisorRole role;
    std::string purpose;
    PromptBundle request;
    std::string raw_response;
    std::string outcome;
    std::string timestamp;  // ISO-8601 UTC
};

class TranscriptLog {
public:
    std::size_t append(AdvisorTranscript t);
    void set_outcome(std::size_t index, std::string outcome);

    std::size_t size() const;
    std::vector<AdvisorTranscript> entries() const;
    std::size_t count(AdvisorRole role, const std::string& purpose) const;

    std::string to_jsonl(bool include_timestamps = true) const;
    void export_jsonl(const std::string& path) const;

private:
    mutable std::mutex mutex_;
    std::vector<AdvisorTranscript> entries_;
};

/// One advisor role: a client, its config and the shared transcript log.
/// Calls are serialized per role; every call (successful or not) appends
/// exactly one transcript.
class Advisor {
public:
    Advisor(std::shared_ptr<AdvisorClient> client, AdvisorConfig config,
            std::shared_ptr<TranscriptLog> log);

    struct Reply {
        std::string text;
        std::size_t transcript;
    };

    Reply ask(PromptBundle prompt, const std::string& purpose);
    void set_outcome(std::size_t transcript, std::string outcome);

    const AdvisorConfig& config() const noexcept { return config_; }
    AdvisorRole role() const noexcept { return config_.role; }
    TranscriptLog& log() const noexcept { return *log_; }

private:
    std::shared_ptr<AdvisorClient> client_;
    AdvisorConfig config_;
    std::shared_ptr<TranscriptLog> log_;
    std::mutex in_flight_;
};

// ---------------------------------------------------------------------------
// Knowledge generation

struct SummaryResult {
    KnowledgeSummary summary;
    std::size_t skipped_lines = 0;
    std::vector<std::string> warnings;
};

/// Three calls (trade-offs, associations, influences), lenient record parse,
/// deterministic merge in that order. Validation findings become warnings.
SummaryResult generate_summary(Advisor& working, const CircuitSpec& spec,
                               const std::string& netlist,
                               const std::vector<EvaluationRecord>& demos,
                               std::size_t iteration);

/// One critique call. Returns the refined summary (provenance REFINED), or
/// the input unchanged with a warning when the reply does not parse as a
/// KS/1 document for the same circuit or the advisor is down.
SummaryResult critique_summary(Advisor& critique, const KnowledgeSummary& k,
                               const CircuitSpec& spec, const std::string& netlist);

}  // namespace uso

#endif  // USO_ADVISOR_HPP
