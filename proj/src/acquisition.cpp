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

#include "uso/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "lbfgs.hpp"
#include "uso/error.hpp"
#include "uso/sampling.hpp"

namespace uso {

namespace {

double norm_pdf(double z) noexcept { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
double norm_cdf(double z) noexcept { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

void AcquisitionConfig::validate() const {
    if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw Error(ErrorKind::InvalidArgument, "kappa must be >= 0");
    if (n_restarts < 1) throw Error(ErrorKind::InvalidArgument, "n_restarts must be positive");
    if (refine_steps < 1) throw Error(ErrorKind::InvalidArgument, "refine_steps must be positive");
    if (mc_samples < 64) throw Error(ErrorKind::InvalidArgument, "mc_samples must be at least 64");
}

std::vector<RankedCandidate> rank_by_ucb(const GpModel& model,
                                         const std::vector<std::vector<double>>& candidates,
                                         double kappa) {
    std::vector<RankedCandidate> out;
    out.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        auto p = model.predict_unit_standardized(model.to_unit(candidates[i]));
        out.push_back({i, ucb(p.mu, p.sigma, kappa), p.mu, p.sigma});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const RankedCandidate& a, const RankedCandidate& b) { return a.ucb > b.ucb; });
    return out;
}

double expected_improvement(double mu, double sigma, double best_y) noexcept {
    double diff = mu - best_y;
    if (!(sigma > 0.0)) return std::max(diff, 0.0);
    double z = diff / sigma;
    return std::max(diff * norm_cdf(z) + sigma * norm_pdf(z), 0.0);
}

double expected_improvement(const GpModel& model, std::span<const double> x, double best_y) {
    auto p = model.predict(x);
    return expected_improvement(p.mu, p.sigma, best_y);
}

McEstimate qei_mc(const GpModel& model, const std::vector<std::vector<double>>& batch,
                  double best_y, const AcquisitionConfig& cfg) {
    if (batch.empty()) throw Error(ErrorKind::InvalidArgument, "qEI needs a nonempty batch");
    if (cfg.mc_samples < 64) throw Error(ErrorKind::InvalidArgument, "mc_samples must be at least 64");
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    model.predict_joint(batch, mean, cov);
    const Eigen::Index q = mean.size();

    // Square root of the joint covariance; duplicates make it singular.
    Eigen::MatrixXd root;
    const double scale = std::max(cov.diagonal().maxCoeff(), 1e-300);
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    for (double rel = 1e-12; llt.info() != Eigen::Success && rel <= 1e-6; rel *= 10.0) {
        Eigen::MatrixXd c = cov;
        c.diagonal().array() += rel * scale;
        llt.compute(c);
    }
    if (llt.info() == Eigen::Success) {
        root = llt.matrixL();
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
        root = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }

    std::mt19937_64 rng(mix_seed(cfg.seed, 0x9e1));
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(q);
    double sum = 0.0, sum_sq = 0.0;
    for (int s = 0; s < cfg.mc_samples; ++s) {
        for (Eigen::Index i = 0; i < q; ++i) z[i] = normal(rng);
        Eigen::VectorXd y = mean + root * z;
        double gain = std::max(y.maxCoeff() - best_y, 0.0);
        sum += gain;
        sum_sq += gain * gain;
    }
    const double n = static_cast<double>(cfg.mc_samples);
    McEstimate est;
    est.value = sum / n;
    double var = std::max(sum_sq / n - est.value * est.value, 0.0);
    est.std_error = std::sqrt(var / (n - 1.0));
    return est;
}

namespace {

double ei_unit(const GpModel& model, const Eigen::VectorXd& u, double best_y) {
    auto s = model.predict_unit_standardized(u);
    return expected_improvement(model.y_mean() + model.y_std() * s.mu, model.y_std() * s.sigma, best_y);
}

double ei_unit_grad(const GpModel& model, const Eigen::VectorXd& u, double best_y,
                    Eigen::VectorXd& grad) {
    auto p = model.predict_unit_with_grad(u);
    double diff = p.mu - best_y;
    if (!(p.sigma > 0.0)) {
        grad = diff > 0.0 ? p.dmu : Eigen::VectorXd::Zero(u.size());
        return std::max(diff, 0.0);
    }
    double z = diff / p.sigma;
    double cdf = norm_cdf(z), pdf = norm_pdf(z);
    grad = cdf * p.dmu + pdf * p.dsigma;
    return std::max(diff * cdf + p.sigma * pdf, 0.0);
}

Eigen::VectorXd refine_quasi_newton(const GpModel& model, const Eigen::VectorXd& start,
                                    double best_y, int steps) {
    const Eigen::Index d = start.size();
    detail::Objective f = [&](const Eigen::VectorXd& u, Eigen::VectorXd& g) {
        double v = ei_unit_grad(model, u, best_y, g);
        g = -g;
        return -v;
    };
    auto res = detail::minimize_box(f, start, Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d), steps);
    return res.x;
}

/// Derivative-free pattern search along the coordinate axes.
Eigen::VectorXd refine_coordinate(const GpModel& model, const Eigen::VectorXd& start,
                                  double best_y, int steps) {
    Eigen::VectorXd u = start;
    double best = ei_unit(model, u, best_y);
    double h = 0.05;
    for (int it = 0; it < steps && h > 1e-7; ++it) {
        bool improved = false;
        for (Eigen::Index j = 0; j < u.size(); ++j) {
            for (double sign : {1.0, -1.0}) {
                Eigen::VectorXd t = u;
                t[j] = std::clamp(t[j] + sign * h, 0.0, 1.0);
                double v = ei_unit(model, t, best_y);
                if (v > best) {
                    best = v;
                    u = t;
                    improved = true;
                    break;
                }
            }
        }
        if (!improved) h *= 0.5;
    }
    return u;
}

}  // namespace

std::vector<double> propose_bo_point(const GpModel& model, double best_y,
                                     const AcquisitionConfig& cfg) {
    cfg.validate();
    const std::size_t d = model.dims();
    const auto dim = static_cast<Eigen::Index>(d);

    // Screening set: shifted Halton points plus the training inputs.
    const std::size_t n_screen = std::max<std::size_t>(512, 64 * d);
    auto halton = shifted_halton(n_screen, d, cfg.seed);
    std::vector<Eigen::VectorXd> pool;
    pool.reserve(n_screen + model.size());
    for (const auto& h : halton) pool.push_back(Eigen::Map<const Eigen::VectorXd>(h.data(), dim));
    for (Eigen::Index i = 0; i < model.data().x.rows(); ++i) pool.push_back(model.data().x.row(i).transpose());

    std::vector<double> score(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) score[i] = ei_unit(model, pool[i], best_y);
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });

    const std::size_t restarts = std::min<std::size_t>(static_cast<std::size_t>(cfg.n_restarts), pool.size());
    Eigen::VectorXd best_u = pool[order[0]];
    double best_ei = score[order[0]];
    for (std::size_t r = 0; r < restarts; ++r) {
        const Eigen::VectorXd& start = pool[order[r]];
        Eigen::VectorXd u = cfg.refinement == Refinement::QuasiNewton
                                ? refine_quasi_newton(model, start, best_y, cfg.refine_steps)
                                : refine_coordinate(model, start, best_y, cfg.refine_steps);
        u = u.cwiseMax(0.0).cwiseMin(1.0);
        if (!u.allFinite()) continue;
        double v = ei_unit(model, u, best_y);
        if (v > best_ei) {
            best_ei = v;
            best_u = u;
        }
    }

    std::vector<double> x(d);
    auto lo = model.lower();
    auto hi = model.upper();
    for (std::size_t i = 0; i < d; ++i)
        x[i] = std::clamp(lo[i] + best_u[static_cast<Eigen::Index>(i)] * (hi[i] - lo[i]), lo[i], hi[i]);
    return x;
}

}  // namespace uso
