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

#include "uso/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "uso/error.hpp"
#include "uso/evaluator.hpp"
#include "uso/sampling.hpp"
#include "uso/surrogate.hpp"

namespace uso {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(Mode m) noexcept {
    switch (m) {
        case Mode::Bo: return "BO";
        case Mode::Hybrid: return "HYBRID";
        case Mode::UsoR: return "USO_R";
        case Mode::UsoC: return "USO_C";
    }
    return "?";
}

std::optional<Mode> mode_from_string(const std::string& s) {
    std::string u;
    for (char c : s) u += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (u == "BO") return Mode::Bo;
    if (u == "HYBRID") return Mode::Hybrid;
    if (u == "USO_R") return Mode::UsoR;
    if (u == "USO_C") return Mode::UsoC;
    return std::nullopt;
}

int queries_per_step(Mode m) noexcept {
    switch (m) {
        case Mode::Bo: return 0;
        case Mode::Hybrid: return 1;
        case Mode::UsoR: return 1;
        case Mode::UsoC: return 4;
    }
    return 0;
}

void ExperimentConfig::validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorKind::Config, m); };
    try {
        spec.validate();
    } catch (const Error& e) {
        fail(std::string("circuit: ") + e.what());
    }
    if (init_points < 2) fail("init_points must be >= 2 (the surrogate needs two points)");
    if (sims_per_step != 2) fail("sims_per_step must be 2 (one BO point and one advisor point)");
    if (demos_k < 1) fail("demos_k must be >= 1");
    if (!(kappa >= 0.0) || !std::isfinite(kappa)) fail("kappa must be finite and >= 0");
    try {
        acquisition.validate();
        advisors.working.validate();
        advisors.critique.validate();
    } catch (const Error& e) {
        fail(e.what());
    }
    const bool needs_advisor = uses_advisor(mode) || bo_init == BoInit::Advisor;
    if (needs_advisor && !advisors.mock && advisors.working.endpoint.empty())
        fail("mode " + std::string(to_string(mode)) + " needs an advisor endpoint or a mock advisor");
    if (uses_reuse(mode) && !advisors.mock && advisors.critique.endpoint.empty())
        fail("mode " + std::string(to_string(mode)) + " needs a critique endpoint or a mock advisor");
    for (const auto& e : library) {
        if (e.summary.circuit_id() != e.spec.circuit_id)
            fail("library summary for '" + e.summary.circuit_id() + "' paired with spec '" +
                 e.spec.circuit_id + "'");
    }
}

// ---------------------------------------------------------------------------
// Orchestrator

namespace {

json point_json(const DesignPoint& x) {
    json j = json::object();
    for (const auto& [k, v] : x.values) j[k] = v;
    return j;
}

json fom_json(double f) { return std::isfinite(f) ? json(f) : json(nullptr); }

bool meets_spec(const EvaluationRecord& r, const CircuitSpec& spec) {
    if (!r.valid) return false;
    for (const auto& m : spec.metrics) {
        auto it = r.metrics.find(m.id);
        if (it == r.metrics.end() || !m.meets(it->second)) return false;
    }
    return true;
}

std::string write_text(const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    f << text;
    if (!f) throw Error(ErrorKind::Io, "cannot write '" + p.string() + "'");
    return p.string();
}

std::shared_ptr<AdvisorClient> make_client(const AdvisorSetup& setup, AdvisorRole role,
                                           std::uint64_t run_seed) {
    if (setup.mock) {
        MockOptions o = *setup.mock;
        o.seed = mix_seed(o.seed, run_seed);
        if (role == AdvisorRole::Critique) o.critique = setup.mock_critique;
        return std::make_shared<MockAdvisor>(std::move(o));
    }
    return std::make_shared<HttpChatClient>(role == AdvisorRole::Working ? setup.working
                                                                         : setup.critique);
}

}  // namespace

struct Orchestrator::State {
    ExperimentConfig cfg;
    Buffer buffer;
    std::vector<json> trace;
    std::shared_ptr<TranscriptLog> log = std::make_shared<TranscriptLog>();
    std::unique_ptr<Advisor> working;
    std::unique_ptr<Advisor> critique;
    ContextDocument reuse;
    std::optional<KnowledgeSummary> summary;
    std::vector<std::string> warnings;
    std::size_t evaluations = 0;
    std::size_t steps = 0;
    std::uint64_t evaluator_calls = 0;
    std::optional<std::size_t> evaluations_to_spec;
    bool initialized = false;
    bool critiqued = false;

    std::vector<EvaluationRecord> demos() const {
        return buffer.top_k(cfg.demos_k);
    }

    // Evaluates concurrently, inserts in the given order.
    std::vector<EvaluationRecord> evaluate_and_insert(const std::vector<DesignPoint>& points,
                                                      const std::vector<RecordSource>& sources,
                                                      std::size_t iteration) {
        std::vector<std::future<EvaluationOutcome>> futures;
        evaluator_calls += points.size();
        for (const auto& x : points)
            futures.push_back(std::async(std::launch::async,
                                         [this, x] { return evaluate(cfg.spec, x); }));
        std::vector<EvaluationRecord> out;
        for (std::size_t i = 0; i < points.size(); ++i) {
            EvaluationOutcome o = futures[i].get();
            EvaluationRecord r = EvaluationRecord::make(points[i], std::move(o.metrics), o.valid,
                                                        iteration, sources[i], cfg.spec.metrics);
            if (!o.valid)
                warnings.push_back("evaluation " + std::to_string(evaluations + 1) +
                                   " failed: " + to_string(o.failure) + " " + o.diagnostics);
            buffer.insert(r);
            ++evaluations;
            if (!evaluations_to_spec && meets_spec(r, cfg.spec)) evaluations_to_spec = evaluations;
            out.push_back(std::move(r));
        }
        return out;
    }

    std::vector<DesignPoint> lhs_points(std::size_t n, std::uint64_t seed) const {
        std::vector<DesignPoint> out;
        const auto u = latin_hypercube(n, cfg.spec.dims(), seed);
        for (const auto& row : u) out.push_back(cfg.spec.from_unit(row));
        return out;
    }

    const ContextDocument* reuse_ptr() const {
        return uses_reuse(cfg.mode) ? &reuse : nullptr;
    }

    bool is_duplicate(const DesignPoint& x, const std::vector<DesignPoint>& also) const {
        const auto ux = cfg.spec.to_unit(x);
        auto close = [&](const DesignPoint& y) {
            const auto uy = cfg.spec.to_unit(y);
            double d2 = 0.0;
            for (std::size_t i = 0; i < ux.size(); ++i) d2 += (ux[i] - uy[i]) * (ux[i] - uy[i]);
            return std::sqrt(d2) < 1e-9;
        };
        for (const auto& r : buffer.records())
            if (close(r.point)) return true;
        return std::any_of(also.begin(), also.end(), close);
    }

    std::string netlist() const { return cfg.spec.netlist_text; }
};

Orchestrator::Orchestrator(ExperimentConfig config) : s_(std::make_unique<State>()) {
    config.validate();
    s_->cfg = std::move(config);
    State& s = *s_;
    const bool needs_working = uses_advisor(s.cfg.mode) || s.cfg.bo_init == BoInit::Advisor;
    if (needs_working) {
        AdvisorConfig wc = s.cfg.advisors.working;
        wc.role = AdvisorRole::Working;
        s.working = std::make_unique<Advisor>(make_client(s.cfg.advisors, AdvisorRole::Working, s.cfg.seed),
                                              wc, s.log);
    }
    if (uses_reuse(s.cfg.mode)) {
        AdvisorConfig cc = s.cfg.advisors.critique;
        cc.role = AdvisorRole::Critique;
        s.critique = std::make_unique<Advisor>(
            make_client(s.cfg.advisors, AdvisorRole::Critique, s.cfg.seed), cc, s.log);
        std::map<std::string, std::string> netlists = s.cfg.library_netlists;
        for (const auto& e : s.cfg.library) netlists.emplace(e.spec.circuit_id, e.spec.netlist_text);
        const auto related = select_related(s.cfg.spec, s.cfg.library, s.cfg.context_overrides);
        s.reuse = assemble_reuse_context(s.cfg.spec, related, netlists);
    }
}

Orchestrator::~Orchestrator() = default;

const ExperimentConfig& Orchestrator::config() const noexcept { return s_->cfg; }
const Buffer& Orchestrator::buffer() const noexcept { return s_->buffer; }
const std::vector<json>& Orchestrator::trace() const noexcept { return s_->trace; }
const TranscriptLog& Orchestrator::transcripts() const noexcept { return *s_->log; }
std::size_t Orchestrator::evaluations() const noexcept { return s_->evaluations; }
std::size_t Orchestrator::completed_steps() const noexcept { return s_->steps; }
const std::optional<KnowledgeSummary>& Orchestrator::summary() const noexcept { return s_->summary; }
const ContextDocument& Orchestrator::reuse_context() const noexcept { return s_->reuse; }

void Orchestrator::initialize() {
    State& s = *s_;
    if (s.initialized) throw Error(ErrorKind::Runtime, "run already initialized");
    s.initialized = true;
    const std::size_t n = s.cfg.init_points;
    const std::uint64_t lhs_seed = mix_seed(s.cfg.seed, 1);

    std::vector<DesignPoint> points;
    std::vector<std::string> origin;
    json advisor_info = nullptr;
    const bool from_advisor = s.cfg.mode != Mode::Bo || s.cfg.bo_init == BoInit::Advisor;
    if (from_advisor) {
        auto prompt = build_suggestion_prompt(s.cfg.spec, s.netlist(), {}, s.reuse_ptr(), n);
        const auto reply = s.working->ask(std::move(prompt), "init");
        try {
            auto parsed = parse_suggestions(reply.text, s.cfg.spec, n);
            std::size_t clipped = static_cast<std::size_t>(
                std::count(parsed.clipped.begin(), parsed.clipped.end(), true));
            s.working->set_outcome(reply.transcript,
                                   "PARSED " + std::to_string(parsed.points.size()) + " CLIPPED " +
                                       std::to_string(clipped) + " DROPPED " +
                                       std::to_string(parsed.dropped));
            for (auto& p : parsed.points) {
                points.push_back(std::move(p));
                origin.push_back("advisor");
            }
            advisor_info = {{"parsed", points.size()}, {"clipped", clipped}, {"dropped", parsed.dropped}};
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::NoParseableSuggestion) throw;
            s.working->set_outcome(reply.transcript, std::string("NO_PARSEABLE_SUGGESTION: ") + e.what());
            advisor_info = {{"parsed", 0}, {"error", e.what()}};
        }
    }
    if (points.size() < n) {
        auto fill = s.lhs_points(n, lhs_seed);
        for (std::size_t i = points.size(); i < n; ++i) {
            points.push_back(fill[i]);
            origin.push_back("lhs");
        }
    }
    const auto recs = s.evaluate_and_insert(points, std::vector<RecordSource>(n, RecordSource::Init), 0);

    json evaluated = json::array();
    for (std::size_t i = 0; i < recs.size(); ++i)
        evaluated.push_back({{"source", to_string(RecordSource::Init)},
                             {"origin", origin[i]},
                             {"point", point_json(recs[i].point)},
                             {"fom", fom_json(recs[i].fom)},
                             {"valid", recs[i].valid}});
    const auto best = s.buffer.best_fom();
    s.trace.push_back({{"iteration", 0},
                       {"phase", "init"},
                       {"advisor", advisor_info},
                       {"evaluated", evaluated},
                       {"best_fom", best ? fom_json(*best) : json(nullptr)},
                       {"evaluations", s.evaluations}});
}

void Orchestrator::step() {
    State& s = *s_;
    if (!s.initialized) throw Error(ErrorKind::Runtime, "step() before initialize()");
    const ExperimentConfig& cfg = s.cfg;
    if (s.evaluations + cfg.sims_per_step > cfg.budget())
        throw Error(ErrorKind::Runtime, "evaluation budget exhausted");
    const std::size_t t = s.steps + 1;
    const CircuitSpec& spec = cfg.spec;
    json row = {{"iteration", t}, {"phase", "step"}};

    // (i) surrogate on every valid record
    std::vector<EvaluationRecord> valid;
    for (auto& r : s.buffer.records())
        if (r.valid) valid.push_back(std::move(r));
    std::optional<GpModel> model;
    double best_y = -std::numeric_limits<double>::infinity();
    if (valid.size() >= 2) {
        Eigen::MatrixXd X(static_cast<Eigen::Index>(valid.size()), static_cast<Eigen::Index>(spec.dims()));
        Eigen::VectorXd y(static_cast<Eigen::Index>(valid.size()));
        for (std::size_t i = 0; i < valid.size(); ++i) {
            const auto v = spec.to_vector(valid[i].point);
            for (std::size_t j = 0; j < v.size(); ++j)
                X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[j];
            y(static_cast<Eigen::Index>(i)) = valid[i].fom;
            best_y = std::max(best_y, valid[i].fom);
        }
        const auto lo = spec.lower_bounds();
        const auto hi = spec.upper_bounds();
        model = GpModel::fit(X, y, lo, hi, mix_seed(cfg.seed, 100 + t));
        const auto& p = model->params();
        row["gp"] = {{"lengthscales", std::vector<double>(p.lengthscales.data(),
                                                          p.lengthscales.data() + p.lengthscales.size())},
                     {"signal_variance", p.signal_variance},
                     {"noise_variance", p.noise_variance},
                     {"lml", model->lml()},
                     {"jitter", model->jitter()},
                     {"degenerate", model->degenerate()}};
    } else {
        row["gp"] = nullptr;
        s.warnings.push_back("step " + std::to_string(t) + ": fewer than two valid records, GP skipped");
    }

    // (ii) one EI proposal
    AcquisitionConfig acq = cfg.acquisition;
    acq.kappa = cfg.kappa;
    acq.seed = mix_seed(cfg.seed, 200 + t);
    DesignPoint bo_point;
    if (model) {
        bo_point = spec.from_vector(propose_bo_point(*model, best_y, acq));
        row["bo"] = {{"point", point_json(bo_point)},
                     {"ei", expected_improvement(*model, spec.to_vector(bo_point), best_y)}};
    } else {
        bo_point = s.lhs_points(1, mix_seed(cfg.seed, 500 + t)).front();
        row["bo"] = {{"point", point_json(bo_point)}, {"fallback", "lhs"}};
    }

    // (iii) second slot
    DesignPoint second;
    RecordSource second_source = RecordSource::Advisor;
    const std::uint64_t substitute_seed = mix_seed(cfg.seed, 400 + t);
    if (cfg.mode == Mode::Bo) {
        second_source = RecordSource::Bo;
        AcquisitionConfig acq2 = acq;
        acq2.seed = mix_seed(cfg.seed, 300 + t);
        if (model) {
            second = spec.from_vector(propose_bo_point(*model, best_y, acq2));
        } else {
            second = s.lhs_points(1, substitute_seed).front();
        }
        row["second"] = {{"point", point_json(second)}};
    } else {
        const auto demos = s.demos();
        const int q = queries_per_step(cfg.mode);
        std::vector<DesignPoint> candidates;
        json cand_log = json::array();
        for (int k = 0; k < q; ++k) {
            const std::string tag =
                q > 1 ? "Candidate " + std::to_string(k + 1) + " of " + std::to_string(q) : "";
            auto prompt = build_suggestion_prompt(spec, s.netlist(), demos, s.reuse_ptr(), 1, tag);
            const auto reply = s.working->ask(std::move(prompt), "suggest");
            try {
                auto parsed = parse_suggestions(reply.text, spec, 1);
                s.working->set_outcome(reply.transcript, parsed.clipped.front() ? "PARSED CLIPPED" : "PARSED");
                candidates.push_back(parsed.points.front());
                cand_log.push_back({{"query", k}, {"point", point_json(parsed.points.front())},
                                    {"clipped", static_cast<bool>(parsed.clipped.front())}});
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::NoParseableSuggestion) throw;
                s.working->set_outcome(reply.transcript, std::string("NO_PARSEABLE_SUGGESTION: ") + e.what());
                cand_log.push_back({{"query", k}, {"error", e.what()}});
            }
        }
        json advisor_row = {{"candidates", cand_log}};
        if (candidates.empty()) {
            second = s.lhs_points(1, substitute_seed).front();
            advisor_row["status"] = "SUBSTITUTED";
            s.warnings.push_back("step " + std::to_string(t) +
                                 ": no parseable suggestion, SUBSTITUTED a seeded LHS point");
        } else if (candidates.size() > 1 && model) {
            std::vector<std::vector<double>> raw;
            for (const auto& c : candidates) raw.push_back(spec.to_vector(c));
            const auto ranked = rank_by_ucb(*model, raw, cfg.kappa);
            json ranking = json::array();
            for (const auto& r : ranked)
                ranking.push_back({{"index", r.index}, {"ucb", r.ucb}, {"mu", r.mu}, {"sigma", r.sigma}});
            advisor_row["ranking"] = ranking;
            advisor_row["chosen"] = ranked.front().index;
            advisor_row["status"] = "RANKED";
            second = candidates[ranked.front().index];
        } else {
            second = candidates.front();
            advisor_row["chosen"] = 0;
            advisor_row["status"] = "OK";
        }
        row["advisor"] = advisor_row;
    }

    // (iv) evaluate both, BO first
    json dups = json::array();
    if (s.is_duplicate(bo_point, {})) dups.push_back(to_string(RecordSource::Bo));
    if (s.is_duplicate(second, {bo_point})) dups.push_back(to_string(second_source));
    if (!dups.empty()) {
        row["duplicates"] = dups;
        for (const auto& d : dups)
            s.warnings.push_back("step " + std::to_string(t) + ": DUPLICATE " + d.get<std::string>() + " point");
    }
    const auto recs = s.evaluate_and_insert({bo_point, second}, {RecordSource::Bo, second_source}, t);
    json evaluated = json::array();
    for (const auto& r : recs)
        evaluated.push_back({{"source", to_string(r.source)},
                             {"point", point_json(r.point)},
                             {"fom", fom_json(r.fom)},
                             {"valid", r.valid}});
    row["evaluated"] = evaluated;

    // (v) knowledge summary refresh
    if (uses_reuse(cfg.mode)) {
        try {
            auto res = generate_summary(*s.working, spec, s.netlist(), s.demos(), t);
            if (cfg.summary_update == SummaryUpdate::Accumulate && s.summary) {
                KnowledgeSummary merged = *s.summary;
                merged.merge(res.summary);
                merged.set_iteration(t);
                s.summary = std::move(merged);
            } else {
                s.summary = std::move(res.summary);
            }
            row["summary"] = {{"records", s.summary->record_count()},
                              {"skipped_lines", res.skipped_lines},
                              {"warnings", res.warnings}};
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::AdvisorUnavailable) throw;
            s.warnings.push_back("step " + std::to_string(t) + ": summary kept, " + e.what());
            row["summary"] = {{"error", e.what()}};
        }
    }

    ++s.steps;
    const auto best = s.buffer.best_fom();
    row["best_fom"] = best ? fom_json(*best) : json(nullptr);
    row["evaluations"] = s.evaluations;
    s.trace.push_back(std::move(row));
}

RunResult Orchestrator::finish() {
    State& s = *s_;
    if (s.evaluations != s.cfg.budget())
        throw Error(ErrorKind::Runtime, "run finished with " + std::to_string(s.evaluations) +
                                            " evaluations, budget is " + std::to_string(s.cfg.budget()));
    if (s.evaluator_calls != s.buffer.size())
        throw Error(ErrorKind::Runtime, "evaluator call count does not match the buffer");
    if (uses_reuse(s.cfg.mode) && s.summary && !s.critiqued) {
        s.critiqued = true;
        auto res = critique_summary(*s.critique, *s.summary, s.cfg.spec, s.netlist());
        for (auto& w : res.warnings) s.warnings.push_back("critique: " + w);
        s.summary = std::move(res.summary);
    }

    RunResult r;
    r.best = s.buffer.best();
    r.summary = s.summary;
    r.buffer = s.buffer;
    r.trace = s.trace;
    r.transcripts = s.log;
    r.evaluator_calls = s.evaluator_calls;
    r.warnings = s.warnings;
    r.evaluations_to_spec = s.evaluations_to_spec;
    r.artifacts = export_artifacts("completed");
    return r;
}

RunResult Orchestrator::run() {
    try {
        initialize();
        for (std::size_t t = 0; t < s_->cfg.iterations; ++t) step();
        return finish();
    } catch (const std::exception& e) {
        try {
            export_artifacts(std::string("failed: ") + e.what());
        } catch (const std::exception&) {
        }
        throw;
    }
}

RunArtifacts Orchestrator::export_artifacts(const std::string& status) const {
    const State& s = *s_;
    RunArtifacts a;
    if (s.cfg.output_dir.empty()) return a;
    const fs::path dir(s.cfg.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create output directory '" + dir.string() + "'");

    a.buffer = write_text(dir / "buffer.jsonl", s.buffer.to_jsonl());
    std::string trace;
    for (const auto& row : s.trace) trace += row.dump() + "\n";
    a.trace = write_text(dir / "trace.jsonl", trace);
    a.transcripts = write_text(dir / "transcripts.jsonl", s.log->to_jsonl(true));
    if (s.summary) a.summary = write_text(dir / "summary.ks", serialize_summary(*s.summary));

    json m;
    m["status"] = status;
    m["circuit_id"] = s.cfg.spec.circuit_id;
    m["mode"] = to_string(s.cfg.mode);
    m["seed"] = s.cfg.seed;
    m["init_points"] = s.cfg.init_points;
    m["iterations"] = s.cfg.iterations;
    m["sims_per_step"] = s.cfg.sims_per_step;
    m["budget"] = s.cfg.budget();
    m["evaluations"] = s.evaluations;
    m["evaluator_calls"] = s.evaluator_calls;
    m["completed_steps"] = s.steps;
    m["bo_init"] = s.cfg.bo_init == BoInit::Lhs ? "lhs" : "advisor";
    m["summary_update"] = s.cfg.summary_update == SummaryUpdate::Replace ? "replace" : "accumulate";
    m["kappa"] = s.cfg.kappa;
    m["transcripts"] = s.log->size();
    m["reuse_sections"] = s.reuse.section_ids;
    if (const auto best = s.buffer.top_k(1); !best.empty()) {
        m["best_fom"] = fom_json(best.front().fom);
        m["best_point"] = point_json(best.front().point);
        m["best_metrics"] = best.front().metrics;
    } else {
        m["best_fom"] = nullptr;
    }
    m["evaluations_to_spec"] = s.evaluations_to_spec ? json(*s.evaluations_to_spec) : json(nullptr);
    m["warnings"] = s.warnings;
    m["annotations"] = s.cfg.annotations;
    json paths = {{"manifest", (dir / "manifest.json").string()},
                  {"buffer", a.buffer},
                  {"trace", a.trace},
                  {"transcripts", a.transcripts}};
    if (!a.summary.empty()) paths["summary"] = a.summary;
    m["artifacts"] = paths;
    a.manifest = write_text(dir / "manifest.json", m.dump(2) + "\n");
    return a;
}

// ---------------------------------------------------------------------------
// Benchmarks

namespace {

double quantile_sorted(const std::vector<double>& v, double q) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    if (lo == hi || v[lo] == v[hi]) return v[lo];
    if (std::isinf(v[hi]) || std::isinf(v[lo])) return frac > 0.0 ? v[hi] : v[lo];
    return v[lo] + (v[hi] - v[lo]) * frac;
}

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream s;
    s << std::setprecision(6) << v;
    return s.str();
}

}  // namespace

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return quantile_sorted(v, 0.5);
}

double interquartile_range(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const double q3 = quantile_sorted(v, 0.75);
    const double q1 = quantile_sorted(v, 0.25);
    if (std::isinf(q3) && std::isinf(q1) && q3 == q1) return 0.0;
    return q3 - q1;
}

std::size_t BenchReport::failed() const noexcept {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const BenchCell& c) { return !c.ok; }));
}

std::string BenchReport::to_csv() const {
    std::ostringstream s;
    s << "label,mode,runs,failures,median_best_fom,iqr_best_fom,median_evals_to_spec,reached_spec\n";
    for (const auto& a : aggregates)
        s << a.label << ',' << to_string(a.mode) << ',' << a.runs << ',' << a.failures << ','
          << fmt(a.median_best_fom) << ',' << fmt(a.iqr_best_fom) << ','
          << fmt(a.median_evals_to_spec) << ',' << a.reached_spec << '\n';
    return s.str();
}

std::string BenchReport::to_table() const {
    std::ostringstream s;
    s << std::left << std::setw(16) << "label" << std::setw(8) << "mode" << std::right
      << std::setw(6) << "runs" << std::setw(6) << "fail" << std::setw(14) << "median FOM"
      << std::setw(12) << "IQR" << std::setw(14) << "evals->spec" << std::setw(9) << "reached"
      << '\n';
    for (const auto& a : aggregates)
        s << std::left << std::setw(16) << a.label << std::setw(8) << to_string(a.mode)
          << std::right << std::setw(6) << a.runs << std::setw(6) << a.failures << std::setw(14)
          << fmt(a.median_best_fom) << std::setw(12) << fmt(a.iqr_best_fom) << std::setw(14)
          << fmt(a.median_evals_to_spec) << std::setw(9) << a.reached_spec << '\n';
    return s.str();
}

BenchReport bench(const std::vector<LabeledConfig>& configs, const std::vector<std::uint64_t>& seeds,
                  const std::string& out_dir) {
    if (configs.empty()) throw Error(ErrorKind::InvalidArgument, "bench needs at least one config");
    if (seeds.empty()) throw Error(ErrorKind::InvalidArgument, "bench needs at least one seed");
    BenchReport report;
    for (const auto& lc : configs) {
        BenchAggregate agg;
        agg.label = lc.label;
        agg.mode = lc.config.mode;
        std::vector<double> foms, evals;
        for (std::uint64_t seed : seeds) {
            BenchCell cell;
            cell.label = lc.label;
            cell.mode = lc.config.mode;
            cell.seed = seed;
            ExperimentConfig cfg = lc.config;
            cfg.seed = seed;
            cfg.output_dir = out_dir.empty()
                                 ? std::string()
                                 : (fs::path(out_dir) / lc.label / ("seed_" + std::to_string(seed))).string();
            try {
                const RunResult r = run(cfg);
                cell.ok = true;
                cell.best_fom = r.best.fom;
                cell.evaluations_to_spec = r.evaluations_to_spec;
                foms.push_back(r.best.fom);
                evals.push_back(r.evaluations_to_spec ? static_cast<double>(*r.evaluations_to_spec)
                                                      : std::numeric_limits<double>::infinity());
                if (r.evaluations_to_spec) ++agg.reached_spec;
            } catch (const std::exception& e) {
                cell.error = e.what();
                ++agg.failures;
            }
            ++agg.runs;
            report.cells.push_back(std::move(cell));
        }
        agg.median_best_fom = median(foms);
        agg.iqr_best_fom = interquartile_range(foms);
        agg.median_evals_to_spec = median(evals);
        report.aggregates.push_back(agg);
    }
    if (!out_dir.empty()) {
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        write_text(fs::path(out_dir) / "report.csv", report.to_csv());
        write_text(fs::path(out_dir) / "report.txt", report.to_table());
    }
    return report;
}

TransferStudy prepare_transfer_study(unsigned family_seed, std::uint64_t source_seed) {
    const ToyCircuit source = toy_circuit_family(family_seed, ToyVariant::Source);
    const ToyCircuit target = toy_circuit_family(family_seed, ToyVariant::Target);

    ExperimentConfig src;
    src.spec = source.spec;
    src.mode = Mode::UsoR;
    src.seed = source_seed;
    MockOptions knowing;
    knowing.policy = MockPolicy::KnowledgeGuided;
    knowing.knowledge = source.ground_truth;
    src.advisors.mock = knowing;
    const RunResult sr = run(src);

    TransferStudy study;
    study.source_summary = sr.summary.value_or(KnowledgeSummary(source.spec.circuit_id));

    ExperimentConfig base;
    base.spec = target.spec;
    MockOptions guided;
    guided.policy = MockPolicy::KnowledgeGuided;
    base.advisors.mock = guided;

    ExperimentConfig hybrid = base;
    hybrid.mode = Mode::Hybrid;
    ExperimentConfig uso_r = base;
    uso_r.mode = Mode::UsoR;
    uso_r.library.push_back({source.spec, study.source_summary});
    ExperimentConfig uso_c = uso_r;
    uso_c.mode = Mode::UsoC;

    study.target_configs = {{"HYBRID", hybrid}, {"USO_R", uso_r}, {"USO_C", uso_c}};
    return study;
}

}  // namespace uso
