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

#include "uso/knowledge.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <variant>

#include "uso/error.hpp"

namespace uso {

char direction_symbol(Direction d) noexcept {
    switch (d) {
    case Direction::Positive: return '+';
    case Direction::Negative: return '-';
    case Direction::NonMonotonic: return '~';
    }
    return '?';
}

std::optional<Direction> direction_from_symbol(std::string_view s) noexcept {
    if (s == "+") return Direction::Positive;
    if (s == "-") return Direction::Negative;
    if (s == "~") return Direction::NonMonotonic;
    return std::nullopt;
}

const char* to_string(Direction d) noexcept {
    switch (d) {
    case Direction::Positive: return "POSITIVE";
    case Direction::Negative: return "NEGATIVE";
    case Direction::NonMonotonic: return "NONMONOTONIC";
    }
    return "?";
}

const char* to_string(Provenance p) noexcept {
    return p == Provenance::Refined ? "REFINED" : "GENERATED";
}

namespace {

void check_id(const std::string& id, const char* what) {
    if (!is_identifier(id))
        throw Error(ErrorKind::InvalidArgument, std::string("invalid ") + what + " id '" + id + "'");
}

void check_note(const std::string& note) {
    if (note.find_first_of("\n\r") != std::string::npos)
        throw Error(ErrorKind::InvalidArgument, "notes must fit on one line");
}

}  // namespace

// ---------------------------------------------------------------------------
// Records

TradeoffRecord::TradeoffRecord(std::string a, std::string b, std::string note)
    : a_(std::move(a)), b_(std::move(b)), note_(std::move(note)) {
    check_id(a_, "metric");
    check_id(b_, "metric");
    if (a_ == b_) throw Error(ErrorKind::InvalidArgument, "trade-off needs two distinct metrics");
    check_note(note_);
    if (b_ < a_) std::swap(a_, b_);
}

void TradeoffRecord::set_note(std::string note) {
    check_note(note);
    note_ = std::move(note);
}

AssociationRecord AssociationRecord::to_metric(std::string substructure, std::string metric,
                                               std::string note) {
    check_id(substructure, "sub-structure");
    check_id(metric, "metric");
    check_note(note);
    AssociationRecord r;
    r.substructure_ = std::move(substructure);
    r.first_ = std::move(metric);
    r.note_ = std::move(note);
    return r;
}

AssociationRecord AssociationRecord::to_tradeoff(std::string substructure, std::string a,
                                                 std::string b, std::string note) {
    check_id(substructure, "sub-structure");
    TradeoffRecord pair(std::move(a), std::move(b));
    check_note(note);
    AssociationRecord r;
    r.substructure_ = std::move(substructure);
    r.first_ = pair.metric_a();
    r.second_ = pair.metric_b();
    r.note_ = std::move(note);
    return r;
}

TradeoffRecord AssociationRecord::pair() const {
    if (!second_) throw Error(ErrorKind::InvalidArgument, "association targets a single metric");
    return TradeoffRecord(first_, *second_);
}

void AssociationRecord::set_note(std::string note) {
    check_note(note);
    note_ = std::move(note);
}

std::vector<std::string> AssociationRecord::metrics() const {
    std::vector<std::string> m{first_};
    if (second_) m.push_back(*second_);
    return m;
}

// ---------------------------------------------------------------------------
// Summary

namespace {

auto key_of(const TradeoffRecord& r) { return std::tie(r.metric_a(), r.metric_b()); }

auto key_of(const AssociationRecord& r) {
    // Single-metric targets sort before pair targets for the same sub-structure.
    auto m = r.metrics();
    return std::make_tuple(r.substructure(), r.is_pair(), m[0], m.size() > 1 ? m[1] : std::string());
}

auto key_of(const InfluenceRecord& r) { return std::tie(r.param, r.substructure, r.metric); }

template <class R>
bool insert_sorted(std::vector<R>& v, R r) {
    auto less = [](const R& a, const R& b) { return key_of(a) < key_of(b); };
    auto it = std::lower_bound(v.begin(), v.end(), r, less);
    if (it != v.end() && it->same_key(r)) return false;
    v.insert(it, std::move(r));
    return true;
}

}  // namespace

KnowledgeSummary::KnowledgeSummary(std::string circuit_id) : circuit_id_(std::move(circuit_id)) {
    check_id(circuit_id_, "circuit");
}

bool KnowledgeSummary::add(TradeoffRecord r) { return insert_sorted(tradeoffs_, std::move(r)); }
bool KnowledgeSummary::add(AssociationRecord r) { return insert_sorted(associations_, std::move(r)); }

bool KnowledgeSummary::add(InfluenceRecord r) {
    check_id(r.param, "parameter");
    check_id(r.substructure, "sub-structure");
    check_id(r.metric, "metric");
    check_note(r.note);
    return insert_sorted(influences_, std::move(r));
}

void KnowledgeSummary::merge(const KnowledgeSummary& other) {
    for (const auto& r : other.tradeoffs_) add(r);
    for (const auto& r : other.associations_) add(r);
    for (const auto& r : other.influences_) add(r);
}

// ---------------------------------------------------------------------------
// KS/1 lexing

namespace {

struct Token {
    std::string text;
    bool quoted = false;
};

/// Splits one physical line. Returns an error reason, or empty on success.
std::string tokenize(std::string_view line, std::vector<Token>& out) {
    out.clear();
    std::size_t i = 0;
    const std::size_t n = line.size();
    auto space = [](char c) { return c == ' ' || c == '\t'; };
    while (i < n) {
        while (i < n && space(line[i])) ++i;
        if (i >= n || line[i] == '#') break;
        Token tok;
        if (line[i] == '"') {
            tok.quoted = true;
            ++i;
            bool closed = false;
            while (i < n) {
                char c = line[i++];
                if (c == '"') {
                    closed = true;
                    break;
                }
                if (c == '\\') {
                    if (i >= n) return "dangling escape in note";
                    char e = line[i++];
                    if (e != '"' && e != '\\') return std::string("unsupported escape \\") + e;
                    tok.text.push_back(e);
                } else {
                    tok.text.push_back(c);
                }
            }
            if (!closed) return "unterminated note";
            if (i < n && !space(line[i]) && line[i] != '#') return "junk after closing quote";
        } else {
            while (i < n && !space(line[i]) && line[i] != '#') {
                if (line[i] == '"') return "stray quote";
                tok.text.push_back(line[i++]);
            }
        }
        out.push_back(std::move(tok));
    }
    return {};
}

std::string escape_note(const std::string& note) {
    std::string out;
    out.reserve(note.size() + 2);
    out.push_back('"');
    for (char c : note) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

using AnyRecord = std::variant<TradeoffRecord, AssociationRecord, InfluenceRecord>;

struct RecordParse {
    std::optional<AnyRecord> record;
    std::string error;     // syntax problem
    bool unknown = false;  // first word is not a record directive
};

bool bare_id(const Token& t) { return !t.quoted && is_identifier(t.text); }

/// tokens[0] is known to be a record keyword when `unknown` is false.
RecordParse parse_record(const std::vector<Token>& t) {
    RecordParse out;
    const std::string& head = t[0].text;
    auto note_at = [&](std::size_t idx, std::string& note) -> bool {
        if (t.size() == idx) return true;
        if (t.size() == idx + 1 && t[idx].quoted) {
            note = t[idx].text;
            return true;
        }
        out.error = t.size() > idx + 1 ? "too many fields" : "note must be double-quoted";
        return false;
    };
    auto need_ids = [&](std::initializer_list<std::size_t> idx, const char* what) -> bool {
        for (auto k : idx) {
            if (!bare_id(t[k])) {
                out.error = std::string("bad ") + what + " '" + t[k].text + "'";
                return false;
            }
        }
        return true;
    };
    auto keyword = [&](std::size_t k, const char* word) -> bool {
        if (t[k].quoted || t[k].text != word) {
            out.error = std::string("expected ") + word;
            return false;
        }
        return true;
    };

    if (t[0].quoted) {
        out.unknown = true;
        return out;
    }
    if (head == "TRADEOFF") {
        if (t.size() < 3) return out.error = "TRADEOFF needs two metrics", out;
        if (!need_ids({1, 2}, "metric")) return out;
        if (t[1].text == t[2].text) return out.error = "trade-off needs two distinct metrics", out;
        std::string note;
        if (!note_at(3, note)) return out;
        out.record = TradeoffRecord(t[1].text, t[2].text, note);
    } else if (head == "ASSOC") {
        if (t.size() < 4) return out.error = "ASSOC needs a sub-structure and a target", out;
        if (!need_ids({1}, "sub-structure")) return out;
        if (!t[2].quoted && t[2].text == "METRIC") {
            if (!need_ids({3}, "metric")) return out;
            std::string note;
            if (!note_at(4, note)) return out;
            out.record = AssociationRecord::to_metric(t[1].text, t[3].text, note);
        } else if (!t[2].quoted && t[2].text == "TRADEOFF") {
            if (t.size() < 5) return out.error = "ASSOC TRADEOFF needs two metrics", out;
            if (!need_ids({3, 4}, "metric")) return out;
            if (t[3].text == t[4].text) return out.error = "trade-off needs two distinct metrics", out;
            std::string note;
            if (!note_at(5, note)) return out;
            out.record = AssociationRecord::to_tradeoff(t[1].text, t[3].text, t[4].text, note);
        } else {
            out.error = "ASSOC target must be METRIC or TRADEOFF";
        }
    } else if (head == "INFL") {
        if (t.size() < 8) return out.error = "INFL needs <p> IN <s> ON <m> DIR <d>", out;
        if (!need_ids({1}, "parameter") || !keyword(2, "IN") || !need_ids({3}, "sub-structure") ||
            !keyword(4, "ON") || !need_ids({5}, "metric") || !keyword(6, "DIR"))
            return out;
        auto dir = t[7].quoted ? std::nullopt : direction_from_symbol(t[7].text);
        if (!dir) return out.error = "bad direction '" + t[7].text + "'", out;
        std::string note;
        if (!note_at(8, note)) return out;
        out.record = InfluenceRecord{t[1].text, t[3].text, t[5].text, *dir, note};
    } else {
        out.unknown = true;
    }
    return out;
}

bool add_any(KnowledgeSummary& k, AnyRecord r) {
    return std::visit([&](auto&& rec) { return k.add(std::move(rec)); }, std::move(r));
}

template <class F>
void for_each_line(std::string_view text, F&& f) {
    std::size_t line_no = 0, pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++line_no;
        if (nl == std::string_view::npos) {
            if (!line.empty()) f(line_no, line);
            break;
        }
        f(line_no, line);
        pos = nl + 1;
    }
}

}  // namespace

KnowledgeSummary parse_summary(std::string_view text) {
    enum class Stage { Magic, Circuit, Body } stage = Stage::Magic;
    KnowledgeSummary k;
    bool saw_provenance = false, saw_iteration = false;
    std::vector<Token> toks;
    std::size_t last_line = 0;

    for_each_line(text, [&](std::size_t no, std::string_view line) {
        last_line = no;
        if (auto err = tokenize(line, toks); !err.empty()) throw ParseError(ErrorKind::Syntax, no, err);
        if (toks.empty()) return;
        const Token& head = toks[0];
        auto syntax = [&](const std::string& why) { throw ParseError(ErrorKind::Syntax, no, why); };

        if (stage == Stage::Magic) {
            if (head.quoted || head.text != "KS/1" || toks.size() != 1) syntax("expected KS/1 header");
            stage = Stage::Circuit;
            return;
        }
        if (stage == Stage::Circuit) {
            if (head.quoted || head.text != "CIRCUIT") syntax("expected CIRCUIT line");
            if (toks.size() != 2 || !bare_id(toks[1])) syntax("CIRCUIT needs one identifier");
            k = KnowledgeSummary(toks[1].text);
            stage = Stage::Body;
            return;
        }
        if (!head.quoted && head.text == "PROVENANCE") {
            if (saw_provenance) syntax("repeated PROVENANCE");
            if (toks.size() != 2 || toks[1].quoted) syntax("PROVENANCE needs GENERATED or REFINED");
            if (toks[1].text == "GENERATED") k.set_provenance(Provenance::Generated);
            else if (toks[1].text == "REFINED") k.set_provenance(Provenance::Refined);
            else syntax("PROVENANCE needs GENERATED or REFINED");
            saw_provenance = true;
            return;
        }
        if (!head.quoted && head.text == "ITERATION") {
            if (saw_iteration) syntax("repeated ITERATION");
            if (toks.size() != 2 || toks[1].quoted || toks[1].text.empty() ||
                toks[1].text.size() > 18 ||
                !std::all_of(toks[1].text.begin(), toks[1].text.end(),
                             [](char c) { return c >= '0' && c <= '9'; }))
                syntax("ITERATION needs a nonnegative integer");
            k.set_iteration(std::stoull(toks[1].text));
            saw_iteration = true;
            return;
        }
        if (!head.quoted && (head.text == "KS/1" || head.text == "CIRCUIT")) syntax("repeated header line");
        auto rec = parse_record(toks);
        if (rec.unknown) throw ParseError(ErrorKind::UnknownDirective, no, "unknown directive '" + head.text + "'");
        if (!rec.error.empty()) syntax(rec.error);
        if (!add_any(k, std::move(*rec.record)))
            throw ParseError(ErrorKind::DuplicateRecord, no, "record repeats an earlier one");
    });

    if (stage == Stage::Magic) throw ParseError(ErrorKind::Syntax, std::max<std::size_t>(last_line, 1), "missing KS/1 header");
    if (stage == Stage::Circuit) throw ParseError(ErrorKind::Syntax, last_line + 1, "missing CIRCUIT line");
    return k;
}

std::string format_record(const TradeoffRecord& r) {
    std::string s = "TRADEOFF " + r.metric_a() + " " + r.metric_b();
    if (!r.note().empty()) s += " " + escape_note(r.note());
    return s;
}

std::string format_record(const AssociationRecord& r) {
    std::string s = "ASSOC " + r.substructure();
    if (r.is_pair()) {
        auto m = r.metrics();
        s += " TRADEOFF " + m[0] + " " + m[1];
    } else {
        s += " METRIC " + r.metric();
    }
    if (!r.note().empty()) s += " " + escape_note(r.note());
    return s;
}

std::string format_record(const InfluenceRecord& r) {
    std::string s = "INFL " + r.param + " IN " + r.substructure + " ON " + r.metric + " DIR ";
    s.push_back(direction_symbol(r.direction));
    if (!r.note.empty()) s += " " + escape_note(r.note);
    return s;
}

std::string serialize_summary(const KnowledgeSummary& k) {
    std::string out = "KS/1\nCIRCUIT " + k.circuit_id() + "\n";
    if (k.provenance() == Provenance::Refined) out += "PROVENANCE REFINED\n";
    if (k.iteration() > 0) out += "ITERATION " + std::to_string(k.iteration()) + "\n";
    for (const auto& r : k.tradeoffs()) out += format_record(r) + "\n";
    for (const auto& r : k.associations()) out += format_record(r) + "\n";
    for (const auto& r : k.influences()) out += format_record(r) + "\n";
    return out;
}

KnowledgeSummary load_summary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_summary(ss.str());
}

void save_summary(const KnowledgeSummary& k, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
    out << serialize_summary(k);
}

LenientParse parse_records_lenient(std::string_view text, std::string circuit_id) {
    LenientParse out{KnowledgeSummary(std::move(circuit_id)), 0};
    std::vector<Token> toks;
    for_each_line(text, [&](std::size_t, std::string_view line) {
        if (!tokenize(line, toks).empty()) {
            ++out.skipped;
            return;
        }
        if (toks.empty()) return;
        const auto& head = toks[0].text;
        if (!toks[0].quoted && (head == "KS/1" || head == "CIRCUIT" || head == "PROVENANCE" ||
                                head == "ITERATION"))
            return;
        auto rec = parse_record(toks);
        if (rec.unknown || !rec.error.empty()) {
            ++out.skipped;
            return;
        }
        add_any(out.summary, std::move(*rec.record));
    });
    return out;
}

// ---------------------------------------------------------------------------
// Validation

const char* to_string(FindingKind k) noexcept {
    switch (k) {
    case FindingKind::UnknownMetric: return "UNKNOWN_METRIC";
    case FindingKind::UnknownSubstructure: return "UNKNOWN_SUBSTRUCTURE";
    case FindingKind::UnknownParam: return "UNKNOWN_PARAM";
    case FindingKind::ParamSubstructureMismatch: return "PARAM_SUBSTRUCTURE_MISMATCH";
    case FindingKind::OrphanInfluence: return "ORPHAN_INFLUENCE";
    }
    return "?";
}

std::size_t ValidationReport::count(FindingKind k) const noexcept {
    return static_cast<std::size_t>(
        std::count_if(findings.begin(), findings.end(), [&](const Finding& f) { return f.kind == k; }));
}

std::vector<std::string> ValidationReport::lines() const {
    std::vector<std::string> out;
    out.reserve(findings.size());
    for (const auto& f : findings) out.push_back(std::string(to_string(f.kind)) + " " + f.detail + " :: " + f.record);
    return out;
}

ValidationReport validate_summary(const KnowledgeSummary& k, const CircuitSpec& spec) {
    ValidationReport report;
    auto add = [&](FindingKind kind, const std::string& record, std::string detail) {
        report.findings.push_back({kind, record, std::move(detail)});
    };
    auto check_metric = [&](const std::string& m, const std::string& line) {
        bool ok = spec.find_metric(m) != nullptr;
        if (!ok) add(FindingKind::UnknownMetric, line, "metric '" + m + "'");
        return ok;
    };
    auto check_sub = [&](const std::string& s, const std::string& line) {
        bool ok = spec.has_substructure(s);
        if (!ok) add(FindingKind::UnknownSubstructure, line, "sub-structure '" + s + "'");
        return ok;
    };

    for (const auto& r : k.tradeoffs()) {
        auto line = format_record(r);
        check_metric(r.metric_a(), line);
        check_metric(r.metric_b(), line);
    }
    for (const auto& r : k.associations()) {
        auto line = format_record(r);
        check_sub(r.substructure(), line);
        for (const auto& m : r.metrics()) check_metric(m, line);
    }
    for (const auto& r : k.influences()) {
        auto line = format_record(r);
        const ParamSpec* p = spec.find_param(r.param);
        if (!p) add(FindingKind::UnknownParam, line, "parameter '" + r.param + "'");
        bool sub_ok = check_sub(r.substructure, line);
        bool metric_ok = check_metric(r.metric, line);
        if (p && sub_ok && p->substructure != r.substructure)
            add(FindingKind::ParamSubstructureMismatch, line,
                "parameter '" + r.param + "' belongs to '" + p->substructure + "'");
        if (sub_ok && metric_ok) {
            bool covered = std::any_of(k.associations().begin(), k.associations().end(),
                                       [&](const AssociationRecord& a) {
                                           return a.substructure() == r.substructure && a.covers(r.metric);
                                       });
            if (!covered)
                add(FindingKind::OrphanInfluence, line,
                    "no association of '" + r.substructure + "' covers '" + r.metric + "'");
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Reuse

std::vector<KnowledgeSummary> select_related(const CircuitSpec& current,
                                             const std::vector<LibraryEntry>& library,
                                             const ContextOverrides& overrides) {
    std::vector<KnowledgeSummary> out;
    if (auto it = overrides.find(current.circuit_id); it != overrides.end()) {
        for (const auto& id : it->second) {
            auto e = std::find_if(library.begin(), library.end(),
                                  [&](const LibraryEntry& le) { return le.spec.circuit_id == id; });
            if (e != library.end()) out.push_back(e->summary);
        }
        return out;
    }
    for (const auto& entry : library) {
        if (entry.spec.circuit_id == current.circuit_id) continue;
        bool shares = std::any_of(entry.spec.substructure_tags.begin(), entry.spec.substructure_tags.end(),
                                  [&](const std::string& t) { return current.has_substructure(t); });
        if (shares) out.push_back(entry.summary);
    }
    return out;
}

std::size_t utf8_length(std::string_view s) noexcept {
    return static_cast<std::size_t>(std::count_if(
        s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

ContextDocument assemble_reuse_context(const CircuitSpec& current,
                                       const std::vector<KnowledgeSummary>& related,
                                       const std::map<std::string, std::string>& netlists) {
    ContextDocument doc;
    std::string& t = doc.text;
    t += "## Current circuit: " + current.circuit_id + "\n";
    t += "Sub-structures:";
    for (const auto& tag : current.substructure_tags) t += " " + tag;
    t += "\nRelated circuits: " + std::to_string(related.size()) + "\n";
    doc.section_ids.push_back("current");
    for (const auto& k : related) {
        auto it = netlists.find(k.circuit_id());
        if (it == netlists.end())
            throw Error(ErrorKind::MissingNetlist, "no netlist for related circuit '" + k.circuit_id() + "'");
        t += "\n## Related circuit: " + k.circuit_id() + "\n";
        t += "### Netlist\n";
        t += it->second;
        if (!it->second.empty() && it->second.back() != '\n') t += "\n";
        t += "### Knowledge summary\n";
        t += serialize_summary(k);
        doc.section_ids.push_back(k.circuit_id());
    }
    doc.length_chars = utf8_length(t);
    return doc;
}

}  // namespace uso
