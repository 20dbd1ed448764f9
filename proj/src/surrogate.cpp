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

#include "uso/surrogate.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "lbfgs.hpp"
#include "uso/error.hpp"
#include "uso/sampling.hpp"

namespace uso {

namespace {

constexpr double kJitterStart = 1e-8;
constexpr double kJitterMax = 1e-4;

// Hyperparameter search box (unit-cube inputs, standardized outputs).
constexpr double kMinLengthscale = 1e-2;
constexpr double kMaxLengthscale = 20.0;
constexpr double kMinSignal = 1e-2;
constexpr double kMaxSignal = 1e2;
constexpr double kMaxNoise = 1.0;

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& x, const KernelParams& p) {
    const Eigen::Index n = x.rows();
    Eigen::MatrixXd k(n, n);
    const Eigen::ArrayXd inv_l2 = p.lengthscales.array().square().inverse();
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) = p.signal_variance;
        for (Eigen::Index j = 0; j < i; ++j) {
            double r2 = ((x.row(i) - x.row(j)).array().square().transpose() * inv_l2).sum();
            k(i, j) = k(j, i) = p.signal_variance * std::exp(-0.5 * r2);
        }
    }
    return k;
}

/// Cholesky of K + (noise + jitter) I with the escalation ladder.
Eigen::LLT<Eigen::MatrixXd> factorize(const Eigen::MatrixXd& k, double noise, double& jitter) {
    Eigen::MatrixXd a = k;
    a.diagonal().array() += noise;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    jitter = 0.0;
    if (llt.info() == Eigen::Success) return llt;
    for (double j = kJitterStart; j <= kJitterMax * 1.0000001; j *= 10.0) {
        Eigen::MatrixXd b = a;
        b.diagonal().array() += j;
        llt.compute(b);
        if (llt.info() == Eigen::Success) {
            jitter = j;
            return llt;
        }
    }
    throw Error(ErrorKind::CholeskyFailure, "kernel matrix not positive definite after jitter 1e-4");
}

double lml_from_factor(const Eigen::LLT<Eigen::MatrixXd>& llt, const Eigen::VectorXd& y,
                       Eigen::VectorXd* alpha_out) {
    Eigen::VectorXd alpha = llt.solve(y);
    const Eigen::MatrixXd& l = llt.matrixLLT();
    double log_det_half = l.diagonal().array().log().sum();
    double n = static_cast<double>(y.size());
    if (alpha_out) *alpha_out = alpha;
    return -0.5 * y.dot(alpha) - log_det_half - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

KernelParams from_log(const Eigen::VectorXd& theta, std::size_t d) {
    KernelParams p;
    p.lengthscales = theta.head(static_cast<Eigen::Index>(d)).array().exp();
    p.signal_variance = std::exp(theta[static_cast<Eigen::Index>(d)]);
    p.noise_variance = std::max(std::exp(theta[static_cast<Eigen::Index>(d) + 1]), kNoiseFloor);
    return p;
}

Eigen::VectorXd to_log(const KernelParams& p) {
    const Eigen::Index d = p.lengthscales.size();
    Eigen::VectorXd theta(d + 2);
    theta.head(d) = p.lengthscales.array().log();
    theta[d] = std::log(p.signal_variance);
    theta[d + 1] = std::log(p.noise_variance);
    return theta;
}

void check_bounds(std::span<const double> lo, std::span<const double> hi, Eigen::Index d) {
    if (static_cast<Eigen::Index>(lo.size()) != d || static_cast<Eigen::Index>(hi.size()) != d)
        throw Error(ErrorKind::InvalidArgument, "bounds do not match input dimension");
    for (std::size_t i = 0; i < lo.size(); ++i)
        if (!(lo[i] < hi[i])) throw Error(ErrorKind::InvalidArgument, "bounds need lo < hi");
}

}  // namespace

KernelParams KernelParams::isotropic(std::size_t dims, double lengthscale, double signal_variance,
                                     double noise_variance) {
    KernelParams p;
    p.lengthscales = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dims), lengthscale);
    p.signal_variance = signal_variance;
    p.noise_variance = noise_variance;
    return p;
}

void KernelParams::validate(std::size_t dims) const {
    if (static_cast<std::size_t>(lengthscales.size()) != dims)
        throw Error(ErrorKind::InvalidArgument, "lengthscale count does not match input dimension");
    if (!(lengthscales.array() > 0.0).all() || !lengthscales.allFinite())
        throw Error(ErrorKind::InvalidArgument, "lengthscales must be positive");
    if (!(signal_variance > 0.0) || !std::isfinite(signal_variance))
        throw Error(ErrorKind::InvalidArgument, "signal variance must be positive");
    if (!(noise_variance >= kNoiseFloor) || !std::isfinite(noise_variance))
        throw Error(ErrorKind::InvalidArgument, "noise variance must be at least 1e-8");
}

double rbf(const KernelParams& p, const Eigen::Ref<const Eigen::VectorXd>& a,
           const Eigen::Ref<const Eigen::VectorXd>& b) {
    double r2 = ((a - b).array() / p.lengthscales.array()).square().sum();
    return p.signal_variance * std::exp(-0.5 * r2);
}

double log_marginal_likelihood(const GpData& data, const KernelParams& params) {
    params.validate(static_cast<std::size_t>(data.x.cols()));
    double jitter = 0.0;
    auto llt = factorize(kernel_matrix(data.x, params), params.noise_variance, jitter);
    return lml_from_factor(llt, data.y, nullptr);
}

double log_marginal_likelihood(const GpData& data, const KernelParams& params,
                               Eigen::VectorXd& grad) {
    const Eigen::Index n = data.x.rows(), d = data.x.cols();
    params.validate(static_cast<std::size_t>(d));
    Eigen::MatrixXd kf = kernel_matrix(data.x, params);
    double jitter = 0.0;
    auto llt = factorize(kf, params.noise_variance, jitter);
    Eigen::VectorXd alpha;
    double lml = lml_from_factor(llt, data.y, &alpha);

    Eigen::MatrixXd w = alpha * alpha.transpose() - llt.solve(Eigen::MatrixXd::Identity(n, n));
    grad.resize(d + 2);
    Eigen::MatrixXd wk = w.cwiseProduct(kf);
    for (Eigen::Index k = 0; k < d; ++k) {
        double inv_l2 = 1.0 / (params.lengthscales[k] * params.lengthscales[k]);
        double acc = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < i; ++j) {
                double diff = data.x(i, k) - data.x(j, k);
                acc += wk(i, j) * diff * diff;
            }
        grad[k] = acc * inv_l2;  // symmetric: 0.5 * 2 * lower triangle
    }
    grad[d] = 0.5 * wk.sum();
    grad[d + 1] = 0.5 * params.noise_variance * w.trace();
    return lml;
}

// ---------------------------------------------------------------------------

Eigen::VectorXd GpModel::to_unit(std::span<const double> raw) const {
    const Eigen::Index d = data_.x.cols();
    if (static_cast<Eigen::Index>(raw.size()) != d)
        throw Error(ErrorKind::InvalidArgument, "query dimension mismatch");
    Eigen::VectorXd u(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        auto k = static_cast<std::size_t>(i);
        u[i] = (raw[k] - lo_[k]) / (hi_[k] - lo_[k]);
    }
    return u;
}

namespace {

struct Standardized {
    GpData data;
    double mean = 0.0;
    double std = 1.0;
    bool degenerate = false;
};

Standardized standardize(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         std::span<const double> lo, std::span<const double> hi) {
    if (x.rows() < 1 || x.cols() < 1) throw Error(ErrorKind::InvalidArgument, "GP needs n >= 1 and d >= 1");
    if (y.size() != x.rows()) throw Error(ErrorKind::InvalidArgument, "x and y row counts differ");
    if (!y.allFinite() || !x.allFinite()) throw Error(ErrorKind::InvalidArgument, "GP data must be finite");
    check_bounds(lo, hi, x.cols());
    Standardized s;
    s.data.x.resize(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        auto k = static_cast<std::size_t>(j);
        s.data.x.col(j) = (x.col(j).array() - lo[k]) / (hi[k] - lo[k]);
    }
    s.mean = y.mean();
    double var = (y.array() - s.mean).square().mean();
    double sd = std::sqrt(var);
    if (!(sd > 1e-12 * std::max(1.0, std::fabs(s.mean)))) {
        s.degenerate = true;
        s.std = s.mean != 0.0 ? std::fabs(s.mean) : 1.0;
        s.data.y = Eigen::VectorXd::Zero(y.size());
    } else {
        s.std = sd;
        s.data.y = (y.array() - s.mean) / sd;
    }
    return s;
}

}  // namespace

void GpModel::build(const KernelParams& params) {
    params.validate(dims());
    params_ = params;
    auto llt = factorize(kernel_matrix(data_.x, params_), params_.noise_variance, jitter_);
    chol_ = llt.matrixL();
    lml_ = lml_from_factor(llt, data_.y, &alpha_);
}

GpModel GpModel::condition(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                           std::span<const double> lo, std::span<const double> hi,
                           const KernelParams& params) {
    auto s = standardize(x, y, lo, hi);
    GpModel m;
    m.data_ = std::move(s.data);
    m.lo_.assign(lo.begin(), lo.end());
    m.hi_.assign(hi.begin(), hi.end());
    m.y_mean_ = s.mean;
    m.y_std_ = s.std;
    m.degenerate_ = s.degenerate;
    m.build(params);
    return m;
}

GpModel GpModel::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                     std::span<const double> lo, std::span<const double> hi, std::uint64_t seed,
                     const FitOptions& options) {
    auto s = standardize(x, y, lo, hi);
    const auto d = static_cast<std::size_t>(x.cols());
    GpModel m;
    m.data_ = std::move(s.data);
    m.lo_.assign(lo.begin(), lo.end());
    m.hi_.assign(hi.begin(), hi.end());
    m.y_mean_ = s.mean;
    m.y_std_ = s.std;
    m.degenerate_ = s.degenerate;

    if (m.degenerate_) {
        // Constant data: nothing to learn beyond the mean.
        m.build(KernelParams::isotropic(d, 0.5, 1.0, 1.0));
        return m;
    }

    const int restarts = std::max(1, options.restarts);
    std::mt19937_64 rng(mix_seed(seed, 0x6b));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto log_uniform = [&](double a, double b) {
        return std::exp(std::log(a) + unit(rng) * (std::log(b) - std::log(a)));
    };

    const auto dim = static_cast<Eigen::Index>(d);
    Eigen::VectorXd lo_t(dim + 2), hi_t(dim + 2);
    lo_t.head(dim).setConstant(std::log(kMinLengthscale));
    hi_t.head(dim).setConstant(std::log(kMaxLengthscale));
    lo_t[dim] = std::log(kMinSignal);
    hi_t[dim] = std::log(kMaxSignal);
    lo_t[dim + 1] = std::log(kNoiseFloor);
    hi_t[dim + 1] = std::log(kMaxNoise);

    const GpData& data = m.data_;
    detail::Objective objective = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& g) {
        try {
            double v = log_marginal_likelihood(data, from_log(theta, d), g);
            g = -g;
            return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
        } catch (const Error&) {
            g.setZero(theta.size());
            return std::numeric_limits<double>::infinity();
        }
    };

    double best_lml = -std::numeric_limits<double>::infinity();
    KernelParams best;
    for (int r = 0; r < restarts; ++r) {
        KernelParams start;
        if (r == 0) {
            start = KernelParams::isotropic(d, 0.5, 1.0, 1e-3);
        } else {
            start.lengthscales.resize(dim);
            for (Eigen::Index k = 0; k < dim; ++k) start.lengthscales[k] = log_uniform(0.05, 2.0);
            start.signal_variance = log_uniform(0.3, 3.0);
            start.noise_variance = log_uniform(1e-6, 1e-2);
        }
        m.start_params_.push_back(start);
        Eigen::VectorXd g;
        double start_f = objective(to_log(start), g);
        m.start_lmls_.push_back(-start_f);
        if (-start_f > best_lml) {
            best_lml = -start_f;
            best = start;
        }
        auto res = detail::minimize_box(objective, to_log(start), lo_t, hi_t, options.max_iterations);
        if (std::isfinite(res.f) && -res.f > best_lml) {
            best_lml = -res.f;
            best = from_log(res.x, d);
        }
    }
    if (!std::isfinite(best_lml))
        throw Error(ErrorKind::CholeskyFailure, "no hyperparameter start produced a usable kernel");
    m.build(best);
    return m;
}

Eigen::VectorXd GpModel::kernel_vector(const Eigen::Ref<const Eigen::VectorXd>& u) const {
    const Eigen::Index n = data_.x.rows();
    Eigen::VectorXd k(n);
    for (Eigen::Index i = 0; i < n; ++i) k[i] = rbf(params_, data_.x.row(i).transpose(), u);
    return k;
}

Prediction GpModel::predict_unit_standardized(const Eigen::Ref<const Eigen::VectorXd>& u) const {
    Eigen::VectorXd k = kernel_vector(u);
    Prediction p;
    p.mu = k.dot(alpha_);
    Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>().solve(k);
    double var = params_.signal_variance - v.squaredNorm();
    p.sigma = std::sqrt(std::max(var, 0.0));
    return p;
}

Prediction GpModel::predict(std::span<const double> raw) const {
    auto s = predict_unit_standardized(to_unit(raw));
    return {y_mean_ + y_std_ * s.mu, y_std_ * s.sigma};
}

PredictionGrad GpModel::predict_unit_with_grad(const Eigen::Ref<const Eigen::VectorXd>& u) const {
    const Eigen::Index n = data_.x.rows(), d = data_.x.cols();
    Eigen::VectorXd k = kernel_vector(u);
    Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>().solve(k);
    Eigen::VectorXd w = chol_.transpose().triangularView<Eigen::Upper>().solve(v);
    double var = std::max(params_.signal_variance - v.squaredNorm(), 0.0);

    PredictionGrad out;
    out.mu = y_mean_ + y_std_ * k.dot(alpha_);
    double sigma_s = std::sqrt(var);
    out.sigma = y_std_ * sigma_s;
    out.dmu = Eigen::VectorXd::Zero(d);
    out.dsigma = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd dvar = Eigen::VectorXd::Zero(d);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            double l2 = params_.lengthscales[j] * params_.lengthscales[j];
            double dk = -k[i] * (u[j] - data_.x(i, j)) / l2;
            out.dmu[j] += alpha_[i] * dk;
            dvar[j] += -2.0 * w[i] * dk;
        }
    }
    out.dmu *= y_std_;
    if (sigma_s > 1e-12) out.dsigma = y_std_ * dvar / (2.0 * sigma_s);
    return out;
}

void GpModel::predict_joint(const std::vector<std::vector<double>>& raw, Eigen::VectorXd& mean,
                            Eigen::MatrixXd& cov) const {
    const auto q = static_cast<Eigen::Index>(raw.size());
    const Eigen::Index n = data_.x.rows();
    Eigen::MatrixXd u(q, data_.x.cols());
    for (Eigen::Index i = 0; i < q; ++i) u.row(i) = to_unit(raw[static_cast<std::size_t>(i)]).transpose();
    Eigen::MatrixXd kx(n, q);
    for (Eigen::Index j = 0; j < q; ++j) kx.col(j) = kernel_vector(u.row(j).transpose());
    Eigen::MatrixXd v = chol_.triangularView<Eigen::Lower>().solve(kx);
    mean = (kx.transpose() * alpha_).array() * y_std_ + y_mean_;
    Eigen::MatrixXd kk = kernel_matrix(u, params_);
    cov = (kk - v.transpose() * v) * (y_std_ * y_std_);
}

}  // namespace uso
