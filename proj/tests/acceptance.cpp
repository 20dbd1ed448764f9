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

// Acceptance suite. Prints one line per criterion:
//   [PASS|FAIL] <n> <name> (<seconds> s): <detail>
// and exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "oracle.hpp"
#include "uso/acquisition.hpp"
#include "uso/advisor.hpp"
#include "uso/error.hpp"
#include "uso/evaluator.hpp"
#include "uso/knowledge.hpp"
#include "uso/orchestrator.hpp"
#include "uso/surrogate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

fs::path scratch_root() {
    static const fs::path root =
        fs::temp_directory_path() / ("uso_acceptance_" + std::to_string(::getpid()));
    return root;
}

std::string read_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::vector<json> read_jsonl(const fs::path& p) {
    std::vector<json> rows;
    std::istringstream in(read_file(p));
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) rows.push_back(json::parse(line));
    return rows;
}

bool close(double a, double b, double rel = 1e-8) {
    return std::abs(a - b) <= rel * std::max(1.0, std::abs(b));
}

struct Dataset {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    std::vector<double> lo, hi;
    oracle::Mat rows;
    oracle::Vec yv;
};

/// Random box, random inputs, smooth random targets.
Dataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t d) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Dataset ds;
    for (std::size_t j = 0; j < d; ++j) {
        const double lo = -5.0 + 10.0 * u(rng);
        ds.lo.push_back(lo);
        ds.hi.push_back(lo + 0.5 + 10.0 * u(rng));
    }
    std::vector<double> w(d), phase(d);
    for (std::size_t j = 0; j < d; ++j) {
        w[j] = 1.0 + 5.0 * u(rng);
        phase[j] = 6.0 * u(rng);
    }
    ds.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    ds.y.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        oracle::Vec row(d);
        double f = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double t = u(rng);
            row[j] = ds.lo[j] + t * (ds.hi[j] - ds.lo[j]);
            f += std::sin(w[j] * t + phase[j]) + 0.3 * t * t;
            ds.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
        }
        f += 0.1 * u(rng);
        ds.rows.push_back(row);
        ds.yv.push_back(f);
        ds.y(static_cast<Eigen::Index>(i)) = f;
    }
    return ds;
}

oracle::Vec lengthscales_of(const uso::KernelParams& p) {
    return oracle::Vec(p.lengthscales.data(), p.lengthscales.data() + p.lengthscales.size());
}

oracle::DenseGp oracle_for(const Dataset& ds, const uso::KernelParams& p) {
    return oracle::DenseGp(ds.rows, ds.yv, ds.lo, ds.hi, lengthscales_of(p), p.signal_variance,
                           p.noise_variance);
}

// ---------------------------------------------------------------------------

Outcome c1_gp_oracle() {
    std::mt19937_64 rng(1001);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::size_t checks = 0, failures = 0;
    double worst = 0.0;
    auto note = [&](double a, double b) {
        ++checks;
        const double err = std::abs(a - b) / std::max(1.0, std::abs(b));
        worst = std::max(worst, err);
        if (!close(a, b)) ++failures;
    };
    for (int set = 0; set < 25; ++set) {
        const std::size_t d = 1 + static_cast<std::size_t>(set % 4);
        const std::size_t n = 2 + static_cast<std::size_t>(u(rng) * 11.0);  // 2..12
        const Dataset ds = random_dataset(rng, std::min<std::size_t>(n, 12), d);
        uso::KernelParams p;
        p.lengthscales.resize(static_cast<Eigen::Index>(d));
        for (std::size_t j = 0; j < d; ++j) p.lengthscales(static_cast<Eigen::Index>(j)) = 0.1 + 1.9 * u(rng);
        p.signal_variance = 0.2 + 2.0 * u(rng);
        p.noise_variance = std::pow(10.0, -3.0 + 2.0 * u(rng));
        const auto model = uso::GpModel::condition(ds.x, ds.y, ds.lo, ds.hi, p);
        const oracle::DenseGp ref = oracle_for(ds, p);
        if (model.jitter() != 0.0) ++failures;
        note(model.lml(), ref.lml());
        auto query = [&](const oracle::Vec& x) {
            const auto pr = model.predict(x);
            oracle::Vec uq(d);
            for (std::size_t j = 0; j < d; ++j) uq[j] = (x[j] - ds.lo[j]) / (ds.hi[j] - ds.lo[j]);
            const auto o = ref.standardized(uq);
            note((pr.mu - ref.y_mean()) / ref.y_std(), o.mu);
            note(pr.sigma * pr.sigma / (ref.y_std() * ref.y_std()), std::max(o.var, 0.0));
        };
        for (const auto& row : ds.rows) query(row);
        for (int q = 0; q < 5; ++q) {
            oracle::Vec x(d);
            for (std::size_t j = 0; j < d; ++j) x[j] = ds.lo[j] + u(rng) * (ds.hi[j] - ds.lo[j]);
            query(x);
        }
    }
    return {failures == 0, std::to_string(checks) + " comparisons on 25 datasets, " +
                               std::to_string(failures) + " outside 1e-8, worst rel " +
                               fmt("%.2e", worst)};
}

Outcome c2_ei_mc() {
    std::mt19937_64 rng(2002);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int analytic_ok = 0, qei_ok = 0;
    double worst_z = 0.0;
    for (int i = 0; i < 20; ++i) {
        const double mu = -2.0 + 4.0 * u(rng);
        const double sigma = 0.05 + 2.95 * u(rng);
        const double best = mu - 2.0 * sigma + 4.0 * sigma * u(rng);
        const double ei = uso::expected_improvement(mu, sigma, best);
        const auto mc = oracle::ei_monte_carlo(mu, sigma, best, 1000000, 7000 + static_cast<unsigned>(i));
        const double z = std::abs(ei - mc.mean) / mc.std_error;
        worst_z = std::max(worst_z, z);
        if (z <= 3.0) ++analytic_ok;
    }
    // q = 1 batch EI against the closed form on a fitted model; the
    // incumbent is drawn relative to each point's posterior as above.
    const Dataset ds = random_dataset(rng, 8, 2);
    const auto model = uso::GpModel::fit(ds.x, ds.y, ds.lo, ds.hi, 5);
    uso::AcquisitionConfig cfg;
    cfg.mc_samples = 1000000;
    for (int i = 0; i < 20; ++i) {
        std::vector<double> x = {ds.lo[0] + u(rng) * (ds.hi[0] - ds.lo[0]),
                                 ds.lo[1] + u(rng) * (ds.hi[1] - ds.lo[1])};
        const auto pr = model.predict(x);
        const double best = pr.mu - 2.0 * pr.sigma + 4.0 * pr.sigma * u(rng);
        cfg.seed = 9000 + static_cast<std::uint64_t>(i);
        const double ei = uso::expected_improvement(model, x, best);
        const auto q = uso::qei_mc(model, {x}, best, cfg);
        const double z = std::abs(ei - q.value) / q.std_error;
        worst_z = std::max(worst_z, z);
        if (z <= 3.0) ++qei_ok;
    }
    return {analytic_ok == 20 && qei_ok == 20,
            "analytic " + std::to_string(analytic_ok) + "/20, qEI(q=1) " + std::to_string(qei_ok) +
                "/20 within 3 SE, worst " + fmt("%.2f", worst_z) + " SE"};
}

Outcome c3_acq_max() {
    std::mt19937_64 rng(3003);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 1e300;
    int ok = 0;
    for (int inst = 0; inst < 10; ++inst) {
        const std::size_t d = inst < 5 ? 1 : 2;
        const std::size_t n = 4 + static_cast<std::size_t>(u(rng) * 5.0);
        const Dataset ds = random_dataset(rng, n, d);
        const auto model = uso::GpModel::fit(ds.x, ds.y, ds.lo, ds.hi, 31 + static_cast<std::uint64_t>(inst));
        const oracle::DenseGp ref = oracle_for(ds, model.params());
        const double best = ds.y.maxCoeff();
        const double grid = ref.grid_ei_max(best, 10000);
        bool both = true;
        for (auto refinement : {uso::Refinement::QuasiNewton, uso::Refinement::Coordinate}) {
            uso::AcquisitionConfig cfg;
            cfg.seed = 77 + static_cast<std::uint64_t>(inst);
            cfg.refinement = refinement;
            const auto x = uso::propose_bo_point(model, best, cfg);
            const auto post = ref.raw(x);
            const double got = oracle::expected_improvement(post.mu, post.sigma, best);
            const double ratio = grid > 0.0 ? got / grid : 1.0;
            worst = std::min(worst, ratio);
            if (ratio < 0.99) both = false;
        }
        if (both) ++ok;
    }
    return {ok == 10, std::to_string(ok) + "/10 instances at >= 0.99 of grid max (both refinements), worst ratio " +
                          fmt("%.5f", worst)};
}

Outcome c4_ucb() {
    std::mt19937_64 rng(4004);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int match = 0, mean_match = 0;
    for (int set = 0; set < 100; ++set) {
        const std::size_t d = 1 + static_cast<std::size_t>(set % 3);
        const Dataset ds = random_dataset(rng, 6 + static_cast<std::size_t>(set % 5), d);
        uso::KernelParams p = uso::KernelParams::isotropic(d, 0.2 + u(rng), 0.5 + u(rng), 1e-3);
        const auto model = uso::GpModel::condition(ds.x, ds.y, ds.lo, ds.hi, p);
        const oracle::DenseGp ref = oracle_for(ds, p);
        const std::size_t m = 2 + static_cast<std::size_t>(u(rng) * 9.0);
        std::vector<std::vector<double>> cands;
        for (std::size_t i = 0; i < m; ++i) {
            std::vector<double> x(d);
            for (std::size_t j = 0; j < d; ++j) x[j] = ds.lo[j] + u(rng) * (ds.hi[j] - ds.lo[j]);
            cands.push_back(x);
        }
        const double kappa = 3.0 * u(rng);
        oracle::Vec score(m), mean(m);
        for (std::size_t i = 0; i < m; ++i) {
            oracle::Vec uq(d);
            for (std::size_t j = 0; j < d; ++j) uq[j] = (cands[i][j] - ds.lo[j]) / (ds.hi[j] - ds.lo[j]);
            const auto o = ref.standardized(uq);
            mean[i] = o.mu;
            score[i] = o.mu + kappa * std::sqrt(std::max(o.var, 0.0));
        }
        auto order = [](const std::vector<uso::RankedCandidate>& r) {
            std::vector<std::size_t> idx;
            for (const auto& c : r) idx.push_back(c.index);
            return idx;
        };
        if (order(uso::rank_by_ucb(model, cands, kappa)) == oracle::argsort_desc(score)) ++match;
        if (order(uso::rank_by_ucb(model, cands, 0.0)) == oracle::argsort_desc(mean)) ++mean_match;
    }
    const bool defaults = uso::AcquisitionConfig{}.kappa == 1.0 && uso::ExperimentConfig{}.kappa == 1.0;
    return {match == 100 && mean_match == 100 && defaults,
            "argsort match " + std::to_string(match) + "/100, kappa=0 mean order " +
                std::to_string(mean_match) + "/100, default kappa " +
                (defaults ? "1.0" : "not 1.0")};
}

uso::ExperimentConfig toy_target_config(uso::Mode mode, std::uint64_t seed) {
    uso::ExperimentConfig cfg;
    cfg.spec = uso::toy_circuit_family(0, uso::ToyVariant::Target).spec;
    cfg.mode = mode;
    cfg.seed = seed;
    uso::MockOptions mock;
    mock.policy = uso::MockPolicy::KnowledgeGuided;
    cfg.advisors.mock = mock;
    const auto source = uso::toy_circuit_family(0, uso::ToyVariant::Source);
    cfg.library.push_back({source.spec, source.ground_truth});
    return cfg;
}

Outcome c5_budget() {
    std::string detail;
    bool pass = true;
    for (auto mode : {uso::Mode::Bo, uso::Mode::Hybrid, uso::Mode::UsoR, uso::Mode::UsoC}) {
        auto cfg = toy_target_config(mode, 3);
        cfg.output_dir = (scratch_root() / "budget" / uso::to_string(mode)).string();
        const auto res = uso::run(cfg);
        const auto buffer = read_jsonl(fs::path(cfg.output_dir) / "buffer.jsonl");
        const auto trace = read_jsonl(fs::path(cfg.output_dir) / "trace.jsonl");
        bool ok = buffer.size() == 45 && res.buffer.size() == 45 && res.evaluator_calls == 45 &&
                  trace.size() == 21;
        const std::string second = mode == uso::Mode::Bo ? "BO" : "ADVISOR";
        std::size_t evaluated = 0;
        for (std::size_t r = 0; ok && r < trace.size(); ++r) {
            const auto& ev = trace[r].at("evaluated");
            evaluated += ev.size();
            if (r == 0) {
                ok = trace[r].at("phase") == "init" && ev.size() == 5;
                for (const auto& e : ev) ok = ok && e.at("source") == "INIT";
            } else {
                ok = trace[r].at("iteration") == r && ev.size() == 2 && ev[0].at("source") == "BO" &&
                     ev[1].at("source") == second;
            }
        }
        std::map<std::string, int> src;
        for (const auto& b : buffer) ++src[b.at("source").get<std::string>()];
        const bool counts = mode == uso::Mode::Bo
                                ? src["INIT"] == 5 && src["BO"] == 40 && src["ADVISOR"] == 0
                                : src["INIT"] == 5 && src["BO"] == 20 && src["ADVISOR"] == 20;
        ok = ok && counts && evaluated == 45;
        pass = pass && ok;
        detail += std::string(detail.empty() ? "" : ", ") + uso::to_string(mode) + " " +
                  std::to_string(buffer.size()) + (ok ? " ok" : " BAD");
    }
    return {pass, detail};
}

Outcome c6_branin() {
    // Grid oracle for the global minimum first.
    double grid_min = 1e300;
    const int g = 4001;
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j)
            grid_min = std::min(grid_min, oracle::branin(-5.0 + 15.0 * i / (g - 1), 15.0 * j / (g - 1)));
    const bool oracle_ok = std::abs(grid_min - 0.397887) < 1e-3 &&
                           std::abs(uso::branin(M_PI, 2.275) - oracle::branin(M_PI, 2.275)) < 1e-12;
    int hits = 0;
    std::string values;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        uso::ExperimentConfig cfg;
        cfg.spec = uso::test_function_spec("branin");
        cfg.mode = uso::Mode::Bo;
        cfg.seed = seed;
        const auto res = uso::run(cfg);
        const double best_f = res.best.metrics.at("f");
        if (res.buffer.size() == 45 && best_f <= 0.9) ++hits;
        values += fmt(seed ? " %.3f" : "%.3f", best_f);
    }
    return {oracle_ok && hits >= 8, "grid min " + fmt("%.6f", grid_min) + ", " + std::to_string(hits) +
                                        "/10 seeds <= 0.9 [" + values + "]"};
}

Outcome c7_transfer() {
    const auto study = uso::prepare_transfer_study(0, 0);
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = 0; s < 20; ++s) seeds.push_back(s);
    const auto report = uso::bench(study.target_configs, seeds);
    const uso::BenchAggregate* h = nullptr;
    const uso::BenchAggregate* r = nullptr;
    const uso::BenchAggregate* c = nullptr;
    for (const auto& a : report.aggregates) {
        if (a.label == "HYBRID") h = &a;
        if (a.label == "USO_R") r = &a;
        if (a.label == "USO_C") c = &a;
    }
    if (!h || !r || !c) return {false, "missing aggregate rows"};
    const bool pass = report.failed() == 0 && r->median_best_fom > h->median_best_fom &&
                      c->median_best_fom >= r->median_best_fom &&
                      c->median_evals_to_spec <= h->median_evals_to_spec;
    return {pass, "median FOM HYBRID " + fmt("%.4f", h->median_best_fom) + ", USO_R " +
                      fmt("%.4f", r->median_best_fom) + ", USO_C " + fmt("%.4f", c->median_best_fom) +
                      "; median evals-to-spec HYBRID " + fmt("%g", h->median_evals_to_spec) +
                      ", USO_C " + fmt("%g", c->median_evals_to_spec) + "; " +
                      std::to_string(report.failed()) + " failed runs"};
}

// Knowledge pipeline ---------------------------------------------------------

uso::KnowledgeSummary random_summary(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick(0, 1 << 20);
    auto id = [&](const char* stem, int n) { return std::string(stem) + std::to_string(pick(rng) % n); };
    const std::vector<std::string> note_parts = {"", "plain note", "with \"quotes\"", "back\\slash",
                                                 "hash # inside", "unicode \xC2\xB5m \xE2\x86\x91",
                                                 "\ttab", "KS/1 CIRCUIT lookalike"};
    auto note = [&] { return note_parts[static_cast<std::size_t>(pick(rng)) % note_parts.size()]; };
    uso::KnowledgeSummary k(id("circ_", 50));
    if (pick(rng) % 2) k.set_provenance(uso::Provenance::Refined);
    if (pick(rng) % 2) k.set_iteration(static_cast<std::size_t>(pick(rng) % 40));
    const int n = pick(rng) % 25;
    for (int i = 0; i < n; ++i) {
        switch (pick(rng) % 4) {
        case 0: {
            auto a = id("m", 6), b = id("m", 6);
            if (a != b) k.add(uso::TradeoffRecord(a, b, note()));
            break;
        }
        case 1: k.add(uso::AssociationRecord::to_metric(id("s", 4), id("m", 6), note())); break;
        case 2: {
            auto a = id("m", 6), b = id("m", 6);
            if (a != b) k.add(uso::AssociationRecord::to_tradeoff(id("s", 4), a, b, note()));
            break;
        }
        default: {
            const uso::Direction dirs[] = {uso::Direction::Positive, uso::Direction::Negative,
                                           uso::Direction::NonMonotonic};
            k.add(uso::InfluenceRecord{id("p", 8), id("s", 4), id("m", 6), dirs[pick(rng) % 3], note()});
        }
        }
    }
    return k;
}

uso::CircuitSpec golden_spec() {
    uso::CircuitSpec s;
    s.circuit_id = "golden";
    s.params = {{"w1", 1, 10, "um", "dp"}, {"l1", 0.1, 1, "um", "dp"}, {"ib", 1, 5, "uA", "bias"}};
    s.metrics = {{"gain", uso::Goal::Maximize, 60, 10}, {"iq", uso::Goal::Minimize, 5, 5},
                 {"ugf", uso::Goal::Maximize, 2, 1}};
    s.substructure_tags = {"dp", "bias"};
    return s;
}

struct GoldenCase {
    const char* body;
    std::vector<std::pair<uso::FindingKind, const char*>> expected;
};

Outcome c8_knowledge() {
    using FK = uso::FindingKind;
    std::mt19937_64 rng(8008);
    int roundtrip = 0;
    for (int i = 0; i < 100; ++i) {
        const auto k = random_summary(rng);
        const std::string text = uso::serialize_summary(k);
        const auto back = uso::parse_summary(text);
        if (back == k && uso::serialize_summary(back) == text) ++roundtrip;
    }

    const std::vector<GoldenCase> corpus = {
        {"", {}},
        {"TRADEOFF gain iq\nASSOC dp TRADEOFF gain iq\nINFL w1 IN dp ON gain DIR +\n", {}},
        {"TRADEOFF gain cmrr\n", {{FK::UnknownMetric, "TRADEOFF cmrr gain"}}},
        {"TRADEOFF psrr cmrr\n",
         {{FK::UnknownMetric, "TRADEOFF cmrr psrr"}, {FK::UnknownMetric, "TRADEOFF cmrr psrr"}}},
        {"ASSOC mirror METRIC gain\n", {{FK::UnknownSubstructure, "ASSOC mirror METRIC gain"}}},
        {"ASSOC dp TRADEOFF gain psrr\n", {{FK::UnknownMetric, "ASSOC dp TRADEOFF gain psrr"}}},
        {"ASSOC dp METRIC gain\nINFL w9 IN dp ON gain DIR +\n",
         {{FK::UnknownParam, "INFL w9 IN dp ON gain DIR +"}}},
        {"ASSOC bias METRIC gain\nINFL w1 IN bias ON gain DIR -\n",
         {{FK::ParamSubstructureMismatch, "INFL w1 IN bias ON gain DIR -"}}},
        {"INFL w1 IN dp ON gain DIR +\n", {{FK::OrphanInfluence, "INFL w1 IN dp ON gain DIR +"}}},
        {"ASSOC dp METRIC iq\nINFL l1 IN dp ON ugf DIR ~\n",
         {{FK::OrphanInfluence, "INFL l1 IN dp ON ugf DIR ~"}}},
        {"INFL w1 IN cascode ON ugf DIR +\n", {{FK::UnknownSubstructure, "INFL w1 IN cascode ON ugf DIR +"}}},
        {"ASSOC dp TRADEOFF gain ugf\nINFL q IN dp ON zz DIR +\nINFL ib IN dp ON ugf DIR +\n",
         {{FK::ParamSubstructureMismatch, "INFL ib IN dp ON ugf DIR +"},
          {FK::UnknownParam, "INFL q IN dp ON zz DIR +"},
          {FK::UnknownMetric, "INFL q IN dp ON zz DIR +"}}},
    };
    const auto spec = golden_spec();
    int golden = 0;
    std::string mismatches;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto k = uso::parse_summary(std::string("KS/1\nCIRCUIT golden\n") + corpus[i].body);
        const auto report = uso::validate_summary(k, spec);
        bool same = report.findings.size() == corpus[i].expected.size();
        for (std::size_t f = 0; same && f < report.findings.size(); ++f)
            same = report.findings[f].kind == corpus[i].expected[f].first &&
                   report.findings[f].record == corpus[i].expected[f].second;
        if (same) ++golden;
        else mismatches += " case" + std::to_string(i);
    }

    // Critique: exactly once per USO run, never degrading the summary.
    int critique_ok = 0, critique_runs = 0;
    for (auto mode : {uso::Mode::UsoR, uso::Mode::UsoC}) {
        for (auto behaviour : {uso::MockCritique::Identity, uso::MockCritique::AnnotateOne,
                               uso::MockCritique::Garbage}) {
            ++critique_runs;
            auto cfg = toy_target_config(mode, 11);
            cfg.iterations = 4;
            cfg.advisors.mock_critique = behaviour;
            uso::Orchestrator orch(cfg);
            orch.initialize();
            for (std::size_t t = 0; t < cfg.iterations; ++t) orch.step();
            const auto before = *orch.summary();
            const auto res = orch.finish();
            const auto& log = *res.transcripts;
            std::size_t critiques = 0;
            for (const auto& e : log.entries())
                if (e.role == uso::AdvisorRole::Critique) ++critiques;
            bool ok = critiques == 1 && res.summary.has_value();
            if (ok) {
                const auto& after = *res.summary;
                const auto f_before = uso::validate_summary(before, cfg.spec).findings.size();
                const auto f_after = uso::validate_summary(after, cfg.spec).findings.size();
                ok = after.record_count() >= before.record_count() && f_after <= f_before;
                if (behaviour == uso::MockCritique::Garbage) ok = ok && after == before;
                else ok = ok && after.provenance() == uso::Provenance::Refined;
            }
            if (ok) ++critique_ok;
        }
    }
    const bool pass = roundtrip == 100 && golden == 12 && critique_ok == critique_runs;
    return {pass, "round-trip " + std::to_string(roundtrip) + "/100, golden " + std::to_string(golden) +
                      "/12" + (mismatches.empty() ? "" : " (mismatch:" + mismatches + ")") +
                      ", critique " + std::to_string(critique_ok) + "/" +
                      std::to_string(critique_runs) + " runs exactly once and non-degrading"};
}

Outcome c9_influences() {
    int agree = 0, total = 0;
    std::string disagreements;
    for (auto variant : {uso::ToyVariant::Source, uso::ToyVariant::Target}) {
        const auto toy = uso::toy_circuit_family(0, variant);
        // Exported summary must carry exactly the listed influences.
        std::size_t infl_match = 0;
        for (const auto& gi : toy.influences)
            for (const auto& r : toy.ground_truth.influences())
                if (r.param == gi.param && r.substructure == gi.substructure && r.metric == gi.metric &&
                    r.direction == gi.direction)
                    ++infl_match;
        if (infl_match != toy.influences.size() ||
            toy.ground_truth.influences().size() != toy.influences.size())
            disagreements += " summary-mismatch";
        std::mt19937_64 rng(9009 + static_cast<unsigned>(variant));
        std::uniform_real_distribution<double> u(0.05, 0.95);
        const auto& spec = toy.spec;
        for (int pt = 0; pt < 10; ++pt) {
            oracle::Vec x(spec.dims());
            for (std::size_t j = 0; j < spec.dims(); ++j)
                x[j] = spec.params[j].lo + u(rng) * spec.params[j].range();
            for (const auto& gi : toy.influences) {
                std::size_t idx = 0;
                while (spec.params[idx].id != gi.param) ++idx;
                auto f = [&](const oracle::Vec& v) {
                    return uso::toy_metrics(0, variant, spec.from_vector(v)).at(gi.metric);
                };
                const double d = oracle::central_difference(f, x, idx, 1e-5 * spec.params[idx].range());
                const bool ok = gi.direction == uso::Direction::Positive ? d > 0.0 : d < 0.0;
                ++total;
                if (ok) ++agree;
                else disagreements += " " + gi.param + "/" + gi.metric;
            }
        }
    }
    return {agree == total && disagreements.empty(),
            std::to_string(agree) + "/" + std::to_string(total) + " finite-difference signs agree" +
                (disagreements.empty() ? "" : ";" + disagreements)};
}

uso::MockScript determinism_script() {
    uso::MockScript s;
    s[uso::request::kSuggest] = {
        "[{\"w1\": 12, \"w2\": 9, \"l1\": 0.6, \"l2\": 0.9, \"wc1\": 14, \"wc2\": 20, \"lc\": 1.1, "
        "\"ib\": 10, \"wb\": 6}]",
        "Try these: [{\"w1\": \"15\", \"w2\": 11, \"l1\": 0.5, \"l2\": 1.2, \"wc1\": 8, \"wc2\": 25, "
        "\"lc\": 1.4, \"ib\": 14, \"wb\": 9}, {\"w1\": 4, \"w2\": 3, \"l1\": 1.8, \"l2\": 0.3, "
        "\"wc1\": 29, \"wc2\": 2, \"lc\": 0.4, \"ib\": 30, \"wb\": 18}]",
        "[{\"w1\": 19, \"w2\": 19, \"l1\": 1.9, \"l2\": 1.9, \"wc1\": 2, \"wc2\": 29, \"lc\": 1.9, "
        "\"ib\": 5, \"wb\": 2}]",
    };
    s[uso::request::kTradeoffs] = {"TRADEOFF gain iq\nTRADEOFF gain ugf\n"};
    s[uso::request::kAssociations] = {"ASSOC diffpair METRIC gain\nASSOC cascode METRIC gain\n"
                                      "ASSOC bias METRIC iq\n"};
    s[uso::request::kInfluences] = {"INFL w1 IN diffpair ON gain DIR +\nINFL lc IN cascode ON gain DIR +\n",
                                    "INFL ib IN bias ON iq DIR +\nnot a record\n"};
    s[uso::request::kCritique] = {"Refined summary:\n```\nKS/1\nCIRCUIT toy_folded_cascode\n"
                                  "TRADEOFF gain iq \"scripted\"\nASSOC bias METRIC iq\n"
                                  "INFL ib IN bias ON iq DIR +\n```\n"};
    return s;
}

Outcome c10_determinism() {
    std::vector<std::string> buffers, summaries;
    for (int run = 0; run < 2; ++run) {
        auto cfg = toy_target_config(uso::Mode::UsoC, 42);
        uso::MockOptions mock;
        mock.policy = uso::MockPolicy::FixedScript;
        mock.script = determinism_script();
        cfg.advisors.mock = mock;
        cfg.output_dir = (scratch_root() / "determinism" / ("run" + std::to_string(run))).string();
        const auto res = uso::run(cfg);
        buffers.push_back(read_file(res.artifacts.buffer));
        summaries.push_back(read_file(res.artifacts.summary));
    }
    const bool pass = !buffers[0].empty() && !summaries[0].empty() && buffers[0] == buffers[1] &&
                      summaries[0] == summaries[1];
    return {pass, "buffer " + std::to_string(buffers[0].size()) + " bytes " +
                      (buffers[0] == buffers[1] ? "identical" : "DIFFERENT") + ", KS/1 " +
                      std::to_string(summaries[0].size()) + " bytes " +
                      (summaries[0] == summaries[1] ? "identical" : "DIFFERENT")};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double limit_s;  // 0: no runtime bound
        std::function<Outcome()> fn;
    };
    const std::vector<Criterion> criteria = {
        {1, "gp-oracle-equivalence", 10, c1_gp_oracle},
        {2, "ei-qei-monte-carlo", 60, c2_ei_mc},
        {3, "acquisition-maximization", 60, c3_acq_max},
        {4, "ucb-ranking", 5, c4_ucb},
        {5, "budget-exactness", 0, c5_budget},
        {6, "bo-sanity-branin", 300, c6_branin},
        {7, "transfer-benefit", 600, c7_transfer},
        {8, "knowledge-pipeline", 0, c8_knowledge},
        {9, "influence-recovery", 0, c9_influences},
        {10, "determinism", 0, c10_determinism},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.fn();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.limit_s > 0 && secs > c.limit_s) {
            out.pass = false;
            out.detail += "; exceeded " + fmt("%g", c.limit_s) + " s";
        }
        if (!out.pass) ++failed;
        std::printf("[%s] %d %s (%.1f s): %s\n", out.pass ? "PASS" : "FAIL", c.id, c.name, secs,
                    out.detail.c_str());
        std::fflush(stdout);
    }
    std::error_code ec;
    fs::remove_all(scratch_root(), ec);
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
