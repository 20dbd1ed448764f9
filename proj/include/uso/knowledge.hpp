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

#ifndef USO_KNOWLEDGE_HPP
#define USO_KNOWLEDGE_HPP

// Structured design knowledge: metric trade-offs, sub-structure/metric
// associations and directional parameter influences, plus the KS/1 text
// format that carries them between runs.
//
// KS/1 grammar (UTF-8, LF, `#` comment to end of line outside quotes):
//
//   KS/1
//   CIRCUIT <token>
//   [PROVENANCE GENERATED|REFINED]     emitted only when REFINED
//   [ITERATION <n>]                    emitted only when n > 0
//   TRADEOFF <m1> <m2> ["note"]
//   ASSOC <s> METRIC <m> ["note"]
//   ASSOC <s> TRADEOFF <m1> <m2> ["note"]
//   INFL <p> IN <s> ON <m> DIR <+|-|~> ["note"]
//
// Record identity ignores the note (and, for INFL, the direction), so a
// summary never holds two records about the same key.

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "uso/circuit_spec.hpp"

namespace uso {

enum class Direction { Positive, Negative, NonMonotonic };
enum class Provenance { Generated, Refined };

char direction_symbol(Direction d) noexcept;
std::optional<Direction> direction_from_symbol(std::string_view s) noexcept;
const char* to_string(Direction d) noexcept;
const char* to_string(Provenance p) noexcept;

/// Unordered metric pair. The constructor stores the pair lexicographically.
class TradeoffRecord {
public:
    TradeoffRecord(std::string a, std::string b, std::string note = {});

    const std::string& metric_a() const noexcept { return a_; }
    const std::string& metric_b() const noexcept { return b_; }
    const std::string& note() const noexcept { return note_; }
    void set_note(std::string note);

    bool involves(std::string_view metric) const noexcept {
        return a_ == metric || b_ == metric;
    }
    bool same_key(const TradeoffRecord& o) const noexcept {
        return a_ == o.a_ && b_ == o.b_;
    }
    std::strong_ordering operator<=>(const TradeoffRecord&) const = default;
    bool operator==(const TradeoffRecord&) const = default;

private:
    std::string a_;
    std::string b_;
    std::string note_;
};

/// Binds a sub-structure to one metric or to a trade-off pair.
class AssociationRecord {
public:
    static AssociationRecord to_metric(std::string substructure, std::string metric,
                                       std::string note = {});
    static AssociationRecord to_tradeoff(std::string substructure, std::string a,
                                         std::string b, std::string note = {});

    const std::string& substructure() const noexcept { return substructure_; }
    bool is_pair() const noexcept { return second_.has_value(); }
    const std::string& metric() const noexcept { return first_; }
    /// Pair view of the target; only meaningful when is_pair().
    TradeoffRecord pair() const;
    const std::string& note() const noexcept { return note_; }
    void set_note(std::string note);

    bool covers(std::string_view metric) const noexcept {
        return first_ == metric || (second_ && *second_ == metric);
    }
    std::vector<std::string> metrics() const;

    bool same_key(const AssociationRecord& o) const noexcept {
        return substructure_ == o.substructure_ && first_ == o.first_ && second_ == o.second_;
    }
    std::strong_ordering operator<=>(const AssociationRecord&) const = default;
    bool operator==(const AssociationRecord&) const = default;

private:
    AssociationRecord() = default;

    std::string substructure_;
    std::string first_;
    std::optional<std::string> second_;
    std::string note_;
};

struct InfluenceRecord {
    std::string param;
    std::string substructure;
    std::string metric;
    Direction direction = Direction::Positive;
    std::string note;

    bool same_key(const InfluenceRecord& o) const noexcept {
        return param == o.param && substructure == o.substructure && metric == o.metric;
    }
    std::strong_ordering operator<=>(const InfluenceRecord&) const = default;
    bool operator==(const InfluenceRecord&) const = default;
};

/// One circuit's knowledge. Records are kept in canonical order at all times,
/// so two summaries compare equal exactly when they serialize identically.
class KnowledgeSummary {
public:
    KnowledgeSummary() = default;
    explicit KnowledgeSummary(std::string circuit_id);

    const std::string& circuit_id() const noexcept { return circuit_id_; }
    Provenance provenance() const noexcept { return provenance_; }
    void set_provenance(Provenance p) noexcept { provenance_ = p; }
    std::size_t iteration() const noexcept { return iteration_; }
    void set_iteration(std::size_t it) noexcept { iteration_ = it; }

    const std::vector<TradeoffRecord>& tradeoffs() const noexcept { return tradeoffs_; }
    const std::vector<AssociationRecord>& associations() const noexcept { return associations_; }
    const std::vector<InfluenceRecord>& influences() const noexcept { return influences_; }

    // Each returns false (and leaves the summary untouched) when a record
    // with the same key is already present.
    bool add(TradeoffRecord r);
    bool add(AssociationRecord r);
    bool add(InfluenceRecord r);

    /// Union by key; records already present keep their own note/direction.
    void merge(const KnowledgeSummary& other);

    std::size_t record_count() const noexcept {
        return tradeoffs_.size() + associations_.size() + influences_.size();
    }
    bool empty() const noexcept { return record_count() == 0; }

    bool operator==(const KnowledgeSummary&) const = default;

private:
    std::string circuit_id_;
    Provenance provenance_ = Provenance::Generated;
    std::size_t iteration_ = 0;
    std::vector<TradeoffRecord> tradeoffs_;
    std::vector<AssociationRecord> associations_;
    std::vector<InfluenceRecord> influences_;
};

// ---------------------------------------------------------------------------
// KS/1 text

/// Strict reader. Throws ParseError with kind Syntax, DuplicateRecord or
/// UnknownDirective.
KnowledgeSummary parse_summary(std::string_view text);

/// Canonical writer; byte-identical for equal summaries.
std::string serialize_summary(const KnowledgeSummary& k);

KnowledgeSummary load_summary(const std::string& path);
void save_summary(const KnowledgeSummary& k, const std::string& path);

/// Lenient reader for free-form advisor responses: every line that is a
/// well-formed record is kept, header lines are ignored, anything else is
/// counted in `skipped`. Duplicates collapse silently.
struct LenientParse {
    KnowledgeSummary summary;
    std::size_t skipped = 0;
};
LenientParse parse_records_lenient(std::string_view text, std::string circuit_id);

/// Canonical single-line forms, as they appear in a KS/1 document.
std::string format_record(const TradeoffRecord& r);
std::string format_record(const AssociationRecord& r);
std::string format_record(const InfluenceRecord& r);

// ---------------------------------------------------------------------------
// Coherence against a circuit spec

enum class FindingKind {
    UnknownMetric,
    UnknownSubstructure,
    UnknownParam,
    ParamSubstructureMismatch,
    OrphanInfluence,
};

const char* to_string(FindingKind k) noexcept;

struct Finding {
    FindingKind kind;
    std::string record;  // canonical record line
    std::string detail;

    bool operator==(const Finding&) const = default;
};

struct ValidationReport {
    std::vector<Finding> findings;

    bool empty() const noexcept { return findings.empty(); }
    std::size_t count(FindingKind k) const noexcept;
    /// One line per finding: `<KIND> <detail> :: <record>`.
    std::vector<std::string> lines() const;
};

/// Findings are reported per record in canonical record order. ORPHAN is only
/// checked for influences whose metric and sub-structure are both known.
ValidationReport validate_summary(const KnowledgeSummary& k, const CircuitSpec& spec);

// ---------------------------------------------------------------------------
// Reuse across circuits

struct LibraryEntry {
    CircuitSpec spec;
    KnowledgeSummary summary;
};

/// Explicit current-circuit -> context-circuit lists; an entry here replaces
/// tag matching for that circuit.
using ContextOverrides = std::map<std::string, std::vector<std::string>>;

/// Summaries of library circuits that share at least one sub-structure tag
/// with `current`, in library order. The current circuit itself is never
/// selected. With an override, the listed circuits are returned in override
/// order; ids absent from the library are skipped.
std::vector<KnowledgeSummary> select_related(const CircuitSpec& current,
                                             const std::vector<LibraryEntry>& library,
                                             const ContextOverrides& overrides = {});

struct ContextDocument {
    std::string text;
    std::vector<std::string> section_ids;  // "current", then related circuit ids
    std::size_t length_chars = 0;           // Unicode code points in `text`
};

/// Throws Error(MissingNetlist) when a related summary has no netlist entry.
ContextDocument assemble_reuse_context(const CircuitSpec& current,
                                       const std::vector<KnowledgeSummary>& related,
                                       const std::map<std::string, std::string>& netlists);

std::size_t utf8_length(std::string_view s) noexcept;

}  // namespace uso

#endif  // USO_KNOWLEDGE_HPP
