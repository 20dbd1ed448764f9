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

#include "uso/evaluator.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include "uso/error.hpp"
#include "uso/sampling.hpp"

namespace uso {

namespace fs = std::filesystem;

namespace {

std::atomic<std::uint64_t> g_evaluations{0};
std::atomic<std::uint64_t> g_exchange_seq{0};

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

const char* to_string(FailureReason r) noexcept {
    switch (r) {
        case FailureReason::None: return "NONE";
        case FailureReason::Simulator: return "SIMULATOR_FAILURE";
        case FailureReason::Timeout: return "TIMEOUT";
        case FailureReason::NonzeroExit: return "NONZERO_EXIT";
        case FailureReason::ParseFailure: return "PARSE_FAILURE";
    }
    return "?";
}

std::uint64_t evaluation_count() noexcept { return g_evaluations.load(); }

// ---------------------------------------------------------------------------
// Test functions

double branin(double x1, double x2) noexcept {
    constexpr double pi = std::numbers::pi;
    constexpr double a = 1.0;
    constexpr double b = 5.1 / (4.0 * pi * pi);
    constexpr double c = 5.0 / pi;
    constexpr double r = 6.0;
    constexpr double s = 10.0;
    constexpr double t = 1.0 / (8.0 * pi);
    const double q = x2 - b * x1 * x1 + c * x1 - r;
    return a * q * q + s * (1.0 - t) * std::cos(x1) + s;
}

double hartmann6(const std::vector<double>& x) noexcept {
    static constexpr std::array<double, 4> alpha{1.0, 1.2, 3.0, 3.2};
    static constexpr double A[4][6] = {{10, 3, 17, 3.5, 1.7, 8},
                                       {0.05, 10, 17, 0.1, 8, 14},
                                       {3, 3.5, 1.7, 10, 17, 8},
                                       {17, 8, 0.05, 10, 0.1, 14}};
    static constexpr double P[4][6] = {{1312, 1696, 5569, 124, 8283, 5886},
                                       {2329, 4135, 8307, 3736, 1004, 9991},
                                       {2348, 1451, 3522, 2883, 3047, 6650},
                                       {4047, 8828, 8732, 5743, 1091, 381}};
    double sum = 0.0;
    for (int i = 0; i < 4; ++i) {
        double inner = 0.0;
        for (int j = 0; j < 6 && j < static_cast<int>(x.size()); ++j) {
            const double d = x[static_cast<std::size_t>(j)] - 1e-4 * P[i][j];
            inner += A[i][j] * d * d;
        }
        sum += alpha[static_cast<std::size_t>(i)] * std::exp(-inner);
    }
    return -sum;
}

namespace {

double sphere(const std::vector<double>& x) noexcept {
    double s = 0.0;
    for (double v : x) s += (v - 0.25) * (v - 0.25);
    return s;
}

CircuitSpec testfn_base(const std::string& name, std::size_t d, double lo, double hi) {
    CircuitSpec s;
    s.circuit_id = name;
    s.substructure_tags = {"domain"};
    for (std::size_t i = 0; i < d; ++i)
        s.params.push_back({"x" + std::to_string(i + 1), lo, hi, "", "domain"});
    s.binding = TestFnBinding{name};
    return s;
}

}  // namespace

CircuitSpec test_function_spec(const std::string& name) {
    if (name == "branin") {
        CircuitSpec s = testfn_base(name, 2, 0.0, 1.0);
        s.params[0].lo = -5.0;
        s.params[0].hi = 10.0;
        s.params[1].lo = 0.0;
        s.params[1].hi = 15.0;
        s.metrics.push_back({"f", Goal::Minimize, 0.9, 1.0});
        return s;
    }
    if (name == "hartmann6") {
        CircuitSpec s = testfn_base(name, 6, 0.0, 1.0);
        s.metrics.push_back({"f", Goal::Minimize, -3.0, 1.0});
        return s;
    }
    if (name == "sphere") {
        CircuitSpec s = testfn_base(name, 4, -1.0, 1.0);
        s.metrics.push_back({"f", Goal::Minimize, 0.01, 1.0});
        return s;
    }
    throw Error(ErrorKind::InvalidArgument, "unknown test function '" + name + "'");
}

// ---------------------------------------------------------------------------
// Toy circuit family

namespace {

// Family coefficients; all in [0.8, 1.2] so signs never flip.
struct ToyCoefficients {
    std::array<double, 12> c{};
};

ToyCoefficients toy_coefficients(unsigned family_seed) {
    std::mt19937_64 rng(mix_seed(family_seed, 0x7f4a7c15u));
    std::uniform_real_distribution<double> u(0.8, 1.2);
    ToyCoefficients k;
    for (double& c : k.c) c = u(rng);
    return k;
}

// Normalized coordinate of a parameter in its box.
double nrm(const CircuitSpec& spec, const DesignPoint& x, const char* id) {
    const ParamSpec* p = spec.find_param(id);
    return (x.at(id) - p->lo) / p->range();
}

double concave(double t) { return std::log1p(3.0 * t) / std::log(4.0); }

struct SharedBlock {
    double gain = 0.0;
    double ugf = 0.0;
    double iq = 0.0;
};

SharedBlock diffpair_block(const ToyCoefficients& k, double u1, double u2, double v1,
                           double v2) {
    const auto& c = k.c;
    SharedBlock b;
    b.gain = 18.0 * c[0] * concave(u1) + 10.0 * c[1] * concave(u2) +
             14.0 * c[2] * concave(v1) + 10.0 * c[3] * concave(v2);
    b.ugf = 2.5 + 0.6 * c[4] * u1 + 0.4 * c[5] * u2 - 1.2 * c[6] * v1 * v1 - 0.8 * c[7] * v2 * v2;
    b.iq = (4.0 + 10.0 * c[8] * u1 * u1 + 6.0 * c[9] * u2 * u2) /
           (1.0 + 0.5 * c[10] * v1 + 0.3 * c[11] * v2);
    return b;
}

void add_diffpair_params(CircuitSpec& s) {
    s.params.push_back({"w1", 1.0, 20.0, "um", "diffpair"});
    s.params.push_back({"w2", 1.0, 20.0, "um", "diffpair"});
    s.params.push_back({"l1", 0.18, 2.0, "um", "diffpair"});
    s.params.push_back({"l2", 0.18, 2.0, "um", "diffpair"});
}

struct ToyEval {
    SharedBlock shared;
    MetricMap metrics;
};

ToyEval toy_eval(unsigned family_seed, ToyVariant variant, const CircuitSpec& spec,
                 const DesignPoint& x) {
    const ToyCoefficients k = toy_coefficients(family_seed);
    ToyEval e;
    e.shared = diffpair_block(k, nrm(spec, x, "w1"), nrm(spec, x, "w2"), nrm(spec, x, "l1"),
                              nrm(spec, x, "l2"));
    const SharedBlock& d = e.shared;
    if (variant == ToyVariant::Source) {
        const double w5 = nrm(spec, x, "w5");
        const double l5 = nrm(spec, x, "l5");
        const double ib = nrm(spec, x, "ib");
        e.metrics["gain"] = d.gain + 16.0 * concave(l5) + 6.0 * w5;
        e.metrics["ugf"] = d.ugf + 0.8 * ib + 0.4 * w5 - 0.6 * l5 * l5;
        e.metrics["iq"] = d.iq + 8.0 * ib * ib + 6.0 * w5 * w5;
    } else {
        const double wc1 = nrm(spec, x, "wc1");
        const double wc2 = nrm(spec, x, "wc2");
        const double lc = nrm(spec, x, "lc");
        const double ib = nrm(spec, x, "ib");
        const double wb = nrm(spec, x, "wb");
        e.metrics["gain"] = d.gain + 20.0 * concave(lc) + 5.0 * std::sin(std::numbers::pi * wc1);
        e.metrics["ugf"] = d.ugf + 1.2 * ib + 0.3 * wc2 - 0.8 * lc * lc + 0.2 * wb;
        e.metrics["iq"] = d.iq + 8.0 * ib * ib + 3.0 * wb;
    }
    return e;
}

constexpr const char* kSourceNetlist =
    "* toy two-stage amplifier (analytic model)\n"
    "M1 n1 inp tail vss nmos W={w1} L={l1}\n"
    "M2 out1 inn tail vss nmos W={w1} L={l1}\n"
    "M3 n1 n1 vdd vdd pmos W={w2} L={l2}\n"
    "M4 out1 n1 vdd vdd pmos W={w2} L={l2}\n"
    "M5 out out1 vdd vdd pmos W={w5} L={l5}\n"
    "IB tail vss DC {ib}u\n"
    "CC out1 out 1p\n";

constexpr const char* kTargetNetlist =
    "* toy folded-cascode amplifier (analytic model)\n"
    "M1 f1 inp tail vss nmos W={w1} L={l1}\n"
    "M2 f2 inn tail vss nmos W={w1} L={l1}\n"
    "M3 f1 b1 vdd vdd pmos W={w2} L={l2}\n"
    "M4 f2 b1 vdd vdd pmos W={w2} L={l2}\n"
    "M5 n3 b2 f1 vdd pmos W={wc1} L={lc}\n"
    "M6 out b2 f2 vdd pmos W={wc1} L={lc}\n"
    "M7 n3 b3 vss vss nmos W={wc2} L={lc}\n"
    "M8 out b3 vss vss nmos W={wc2} L={lc}\n"
    "MB b1 b1 vdd vdd pmos W={wb} L=1u\n"
    "IB tail vss DC {ib}u\n";

std::vector<GroundTruthInfluence> toy_influences(ToyVariant variant) {
    using D = Direction;
    std::vector<GroundTruthInfluence> out;
    for (const char* w : {"w1", "w2"}) {
        out.push_back({w, "diffpair", "gain", D::Positive});
        out.push_back({w, "diffpair", "ugf", D::Positive});
        out.push_back({w, "diffpair", "iq", D::Positive});
    }
    for (const char* l : {"l1", "l2"}) {
        out.push_back({l, "diffpair", "gain", D::Positive});
        out.push_back({l, "diffpair", "ugf", D::Negative});
        out.push_back({l, "diffpair", "iq", D::Negative});
    }
    if (variant == ToyVariant::Source) {
        out.push_back({"l5", "output_stage", "gain", D::Positive});
        out.push_back({"l5", "output_stage", "ugf", D::Negative});
        out.push_back({"w5", "output_stage", "gain", D::Positive});
        out.push_back({"w5", "output_stage", "ugf", D::Positive});
        out.push_back({"w5", "output_stage", "iq", D::Positive});
        out.push_back({"ib", "bias", "ugf", D::Positive});
        out.push_back({"ib", "bias", "iq", D::Positive});
    } else {
        out.push_back({"lc", "cascode", "gain", D::Positive});
        out.push_back({"lc", "cascode", "ugf", D::Negative});
        out.push_back({"wc2", "cascode", "ugf", D::Positive});
        out.push_back({"ib", "bias", "ugf", D::Positive});
        out.push_back({"ib", "bias", "iq", D::Positive});
        out.push_back({"wb", "bias", "ugf", D::Positive});
        out.push_back({"wb", "bias", "iq", D::Positive});
    }
    return out;
}

}  // namespace

ToyCircuit toy_circuit_family(unsigned family_seed, ToyVariant variant) {
    ToyCircuit t;
    CircuitSpec& s = t.spec;
    add_diffpair_params(s);
    if (variant == ToyVariant::Source) {
        s.circuit_id = "toy_two_stage";
        s.substructure_tags = {"diffpair", "output_stage", "bias"};
        s.params.push_back({"w5", 2.0, 50.0, "um", "output_stage"});
        s.params.push_back({"l5", 0.18, 2.0, "um", "output_stage"});
        s.params.push_back({"ib", 1.0, 40.0, "uA", "bias"});
        s.metrics.push_back({"gain", Goal::Maximize, 66.0, 10.0});
        s.metrics.push_back({"ugf", Goal::Maximize, 2.3, 1.0});
        s.metrics.push_back({"iq", Goal::Minimize, 12.0, 5.0});
        s.netlist_text = kSourceNetlist;
        s.binding = AnalyticBinding{"toy_source", family_seed};
    } else {
        s.circuit_id = "toy_folded_cascode";
        s.substructure_tags = {"diffpair", "cascode", "bias"};
        s.params.push_back({"wc1", 1.0, 30.0, "um", "cascode"});
        s.params.push_back({"wc2", 1.0, 30.0, "um", "cascode"});
        s.params.push_back({"lc", 0.18, 2.0, "um", "cascode"});
        s.params.push_back({"ib", 1.0, 40.0, "uA", "bias"});
        s.params.push_back({"wb", 1.0, 20.0, "um", "bias"});
        s.metrics.push_back({"gain", Goal::Maximize, 61.0, 10.0});
        s.metrics.push_back({"ugf", Goal::Maximize, 2.3, 1.0});
        s.metrics.push_back({"iq", Goal::Minimize, 11.0, 5.0});
        s.netlist_text = kTargetNetlist;
        s.binding = AnalyticBinding{"toy_target", family_seed};
    }

    t.influences = toy_influences(variant);

    t.ground_truth = KnowledgeSummary(s.circuit_id);
    KnowledgeSummary& k = t.ground_truth;
    k.add(TradeoffRecord("gain", "iq", "wider devices raise gain and current"));
    k.add(TradeoffRecord("gain", "ugf", "longer devices raise gain and slow the amplifier"));
    k.add(TradeoffRecord("iq", "ugf", "bandwidth costs current"));
    k.add(AssociationRecord::to_tradeoff("diffpair", "gain", "iq", ""));
    std::set<std::pair<std::string, std::string>> assoc;
    for (const auto& g : t.influences) assoc.emplace(g.substructure, g.metric);
    for (const auto& [sub, metric] : assoc)
        k.add(AssociationRecord::to_metric(sub, metric, ""));
    for (const auto& g : t.influences)
        k.add(InfluenceRecord{g.param, g.substructure, g.metric, g.direction, ""});
    return t;
}

MetricMap toy_metrics(unsigned family_seed, ToyVariant variant, const DesignPoint& x) {
    const CircuitSpec spec = toy_circuit_family(family_seed, variant).spec;
    return toy_eval(family_seed, variant, spec, x).metrics;
}

MetricMap toy_shared_components(unsigned family_seed, ToyVariant variant, const DesignPoint& x) {
    const CircuitSpec spec = toy_circuit_family(family_seed, variant).spec;
    const ToyEval e = toy_eval(family_seed, variant, spec, x);
    return {{"gain_dp", e.shared.gain}, {"ugf_dp", e.shared.ugf}, {"iq_dp", e.shared.iq}};
}

CircuitSpec builtin_circuit(const std::string& name, unsigned family_seed) {
    if (name == "toy_source") return toy_circuit_family(family_seed, ToyVariant::Source).spec;
    if (name == "toy_target") return toy_circuit_family(family_seed, ToyVariant::Target).spec;
    if (name == "branin" || name == "hartmann6" || name == "sphere")
        return test_function_spec(name);
    throw Error(ErrorKind::InvalidArgument, "unknown built-in circuit '" + name + "'");
}

// ---------------------------------------------------------------------------
// Dispatch

namespace {

MetricMap eval_analytic(const AnalyticBinding& b, const CircuitSpec& spec, const DesignPoint& x) {
    ToyVariant v;
    if (b.name == "toy_source") {
        v = ToyVariant::Source;
    } else if (b.name == "toy_target") {
        v = ToyVariant::Target;
    } else {
        throw Error(ErrorKind::InvalidArgument, "unknown analytic model '" + b.name + "'");
    }
    return toy_eval(b.family_seed, v, spec, x).metrics;
}

MetricMap eval_testfn(const TestFnBinding& b, const CircuitSpec& spec, const DesignPoint& x) {
    const std::vector<double> v = spec.to_vector(x);
    if (b.name == "branin") {
        if (v.size() != 2) throw Error(ErrorKind::InvalidArgument, "branin needs 2 params");
        return {{"f", branin(v[0], v[1])}};
    }
    if (b.name == "hartmann6") {
        if (v.size() != 6) throw Error(ErrorKind::InvalidArgument, "hartmann6 needs 6 params");
        return {{"f", hartmann6(v)}};
    }
    if (b.name == "sphere") return {{"f", sphere(v)}};
    throw Error(ErrorKind::InvalidArgument, "unknown test function '" + b.name + "'");
}

void add_point_noise(const CircuitSpec& spec, const DesignPoint& x, MetricMap& m) {
    std::string key;
    for (const auto& [id, v] : x.values) key += id + "=" + format_double(v) + ";";
    std::mt19937_64 rng(fnv1a(key));
    std::normal_distribution<double> n(0.0, spec.noise_std);
    for (const MetricSpec& ms : spec.metrics) {
        auto it = m.find(ms.id);
        if (it != m.end()) it->second += n(rng);
    }
}

// Declared metrics present and finite; otherwise describes the first gap.
std::string check_metrics(const CircuitSpec& spec, const MetricMap& m) {
    for (const MetricSpec& ms : spec.metrics) {
        auto it = m.find(ms.id);
        if (it == m.end()) return "missing metric '" + ms.id + "'";
        if (!std::isfinite(it->second)) return "non-finite metric '" + ms.id + "'";
    }
    return {};
}

}  // namespace

EvaluationOutcome evaluate(const CircuitSpec& spec, const DesignPoint& x) {
    g_evaluations.fetch_add(1);
    for (const ParamSpec& p : spec.params)
        if (!x.values.count(p.id))
            throw Error(ErrorKind::InvalidArgument, "design point lacks parameter '" + p.id + "'");

    EvaluationOutcome out;
    if (!spec.contains(x)) {
        out.failure = FailureReason::Simulator;
        out.diagnostics = "design point outside parameter bounds";
        return out;
    }

    if (const auto* ext = std::get_if<ExternalBinding>(&spec.binding))
        return run_external(*ext, spec, x);

    if (const auto* a = std::get_if<AnalyticBinding>(&spec.binding)) {
        out.metrics = eval_analytic(*a, spec, x);
    } else {
        out.metrics = eval_testfn(std::get<TestFnBinding>(spec.binding), spec, x);
    }
    if (spec.noise_std > 0.0) add_point_noise(spec, x, out.metrics);

    const std::string problem = check_metrics(spec, out.metrics);
    if (!problem.empty()) {
        out.failure = FailureReason::Simulator;
        out.diagnostics = problem;
        return out;
    }
    out.valid = true;
    return out;
}

// ---------------------------------------------------------------------------
// External adapter

namespace {

void replace_all(std::string& s, const std::string& from, const std::string& to) {
    for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size())
        s.replace(pos, from.size(), to);
}

std::string read_tail(const fs::path& p, std::size_t max_bytes) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return {};
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string s = ss.str();
    if (s.size() > max_bytes) s = s.substr(s.size() - max_bytes);
    return s;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Parses `metric=value` lines; returns an error message or empty.
std::string parse_metric_file(const fs::path& p, MetricMap& out) {
    std::ifstream in(p);
    if (!in) return "output file '" + p.string() + "' not found";
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            return "output line " + std::to_string(lineno) + ": expected metric=value";
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        char* end = nullptr;
        const double v = std::strtod(val.c_str(), &end);
        if (key.empty() || val.empty() || end != val.c_str() + val.size())
            return "output line " + std::to_string(lineno) + ": bad value '" + val + "'";
        out[key] = v;
    }
    return {};
}

}  // namespace

EvaluationOutcome run_external(const ExternalBinding& binding, const CircuitSpec& spec,
                               const DesignPoint& x) {
    EvaluationOutcome out;
    const fs::path root = binding.exchange_dir.empty()
                              ? fs::temp_directory_path() / "uso_exchange"
                              : fs::path(binding.exchange_dir);
    const fs::path dir = root / ("eval_" + std::to_string(::getpid()) + "_" +
                                 std::to_string(g_exchange_seq.fetch_add(1)));
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        out.failure = FailureReason::Simulator;
        out.diagnostics = "cannot create exchange directory: " + ec.message();
        return out;
    }
    const fs::path input = dir / "design.txt";
    const fs::path output = dir / "metrics.txt";
    const fs::path log = dir / "log.txt";
    {
        std::ofstream f(input);
        for (const ParamSpec& p : spec.params) f << p.id << '=' << format_double(x.at(p.id)) << '\n';
        if (!f) {
            out.failure = FailureReason::Simulator;
            out.diagnostics = "cannot write input file " + input.string();
            return out;
        }
    }

    std::string command = binding.command_template;
    replace_all(command, "{input}", input.string());
    replace_all(command, "{output}", output.string());
    const std::string log_path = log.string();

    // Everything the child touches is prepared before fork.
    const pid_t pid = ::fork();
    if (pid < 0) {
        out.failure = FailureReason::Simulator;
        out.diagnostics = "fork failed";
        return out;
    }
    if (pid == 0) {
        ::setpgid(0, 0);
        const int fd = ::open(log_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        if (fd >= 0) {
            ::dup2(fd, 1);
            ::dup2(fd, 2);
            ::close(fd);
        }
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::setpgid(pid, pid);

    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::duration<double>(binding.timeout_s);
    int status = 0;
    bool timed_out = false;
    for (;;) {
        const pid_t r = ::waitpid(pid, &status, WNOHANG);
        if (r == pid) break;
        if (r < 0) {
            status = -1;
            break;
        }
        if (std::chrono::steady_clock::now() >= deadline) {
            ::killpg(pid, SIGKILL);
            ::kill(pid, SIGKILL);
            ::waitpid(pid, &status, 0);
            timed_out = true;
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }

    const std::string diag = read_tail(log, 4096);
    if (timed_out) {
        out.failure = FailureReason::Timeout;
        out.diagnostics = "command timed out after " + format_double(binding.timeout_s) + " s\n" + diag;
        return out;
    }
    if (status == -1 || !WIFEXITED(status)) {
        out.failure = FailureReason::Simulator;
        out.diagnostics = "command terminated abnormally\n" + diag;
        return out;
    }
    if (WEXITSTATUS(status) != 0) {
        out.failure = FailureReason::NonzeroExit;
        out.diagnostics = "command exited with status " + std::to_string(WEXITSTATUS(status)) +
                          "\n" + diag;
        return out;
    }

    const std::string err = parse_metric_file(output, out.metrics);
    const std::string problem = err.empty() ? check_metrics(spec, out.metrics) : err;
    if (!problem.empty()) {
        out.failure = FailureReason::ParseFailure;
        out.diagnostics = problem + (diag.empty() ? "" : "\n" + diag);
        return out;
    }
    out.valid = true;
    fs::remove_all(dir, ec);
    return out;
}

}  // namespace uso
