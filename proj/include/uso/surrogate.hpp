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

#ifndef USO_SURROGATE_HPP
#define USO_SURROGATE_HPP

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace uso {

inline constexpr double kNoiseFloor = 1e-8;

/// RBF kernel hyperparameters with one lengthscale per input dimension
/// (unit-cube coordinates).
struct KernelParams {
    Eigen::VectorXd lengthscales;
    double signal_variance = 1.0;
    double noise_variance = 1e-6;

    static KernelParams isotropic(std::size_t dims, double lengthscale,
                                  double signal_variance, double noise_variance);
    /// Throws Error(InvalidArgument) unless every entry is positive and the
    /// noise is at least kNoiseFloor.
    void validate(std::size_t dims) const;
};

/// sf2 * exp(-0.5 * sum_d (a_d - b_d)^2 / l_d^2)
double rbf(const KernelParams& p, const Eigen::Ref<const Eigen::VectorXd>& a,
           const Eigen::Ref<const Eigen::VectorXd>& b);

/// Training data after input/output normalization.
struct GpData {
    Eigen::MatrixXd x;  // n x d, unit cube
    Eigen::VectorXd y;  // standardized
};

/// Exact log marginal likelihood of standardized data under `params`.
/// Cholesky failures escalate jitter 1e-8 .. 1e-4; beyond that throws
/// Error(CholeskyFailure).
double log_marginal_likelihood(const GpData& data, const KernelParams& params);

/// LML plus its gradient with respect to
/// (log l_1..log l_d, log signal_variance, log noise_variance).
double log_marginal_likelihood(const GpData& data, const KernelParams& params,
                               Eigen::VectorXd& grad_log_params);

struct Prediction {
    double mu = 0.0;
    double sigma = 0.0;
};

/// Prediction with gradients with respect to unit-cube input coordinates.
struct PredictionGrad {
    double mu = 0.0;
    double sigma = 0.0;
    Eigen::VectorXd dmu;
    Eigen::VectorXd dsigma;
};

struct FitOptions {
    int restarts = 8;
    int max_iterations = 200;
};

/// Fitted GP surrogate. Immutable after construction; safe to query from
/// many threads.
class GpModel {
public:
    /// Fits hyperparameters by multi-start maximization of the LML.
    /// `x` rows are raw design vectors, bounded by `lo`/`hi`.
    static GpModel fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       std::span<const double> lo, std::span<const double> hi,
                       std::uint64_t seed, const FitOptions& options = {});

    /// Conditions on data with fixed hyperparameters (no fitting).
    static GpModel condition(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             std::span<const double> lo, std::span<const double> hi,
                             const KernelParams& params);

    std::size_t size() const noexcept { return static_cast<std::size_t>(data_.x.rows()); }
    std::size_t dims() const noexcept { return static_cast<std::size_t>(data_.x.cols()); }

    const KernelParams& params() const noexcept { return params_; }
    const GpData& data() const noexcept { return data_; }
    double y_mean() const noexcept { return y_mean_; }
    double y_std() const noexcept { return y_std_; }
    /// All training targets were identical; the model is a constant mean
    /// with noise-only hyperparameters.
    bool degenerate() const noexcept { return degenerate_; }
    double lml() const noexcept { return lml_; }
    /// Diagonal jitter that was added on top of the noise variance.
    double jitter() const noexcept { return jitter_; }
    const Eigen::MatrixXd& cholesky() const noexcept { return chol_; }
    /// LML of every multi-start initialization, before refinement.
    const std::vector<double>& start_lmls() const noexcept { return start_lmls_; }
    const std::vector<KernelParams>& start_params() const noexcept { return start_params_; }

    std::span<const double> lower() const noexcept { return lo_; }
    std::span<const double> upper() const noexcept { return hi_; }

    Eigen::VectorXd to_unit(std::span<const double> raw) const;

    /// Posterior in original y units; sigma excludes observation noise.
    Prediction predict(std::span<const double> raw) const;
    /// Posterior in standardized units at unit-cube coordinates.
    Prediction predict_unit_standardized(const Eigen::Ref<const Eigen::VectorXd>& u) const;
    /// Original y units, gradients with respect to unit-cube coordinates.
    PredictionGrad predict_unit_with_grad(const Eigen::Ref<const Eigen::VectorXd>& u) const;

    /// Joint posterior over a batch of raw points in original y units.
    void predict_joint(const std::vector<std::vector<double>>& raw, Eigen::VectorXd& mean,
                       Eigen::MatrixXd& cov) const;

private:
    GpModel() = default;
    void build(const KernelParams& params);
    Eigen::VectorXd kernel_vector(const Eigen::Ref<const Eigen::VectorXd>& u) const;

    GpData data_;
    KernelParams params_;
    std::vector<double> lo_;
    std::vector<double> hi_;
    double y_mean_ = 0.0;
    double y_std_ = 1.0;
    bool degenerate_ = false;
    double lml_ = 0.0;
    double jitter_ = 0.0;
    Eigen::MatrixXd chol_;
    Eigen::VectorXd alpha_;
    std::vector<double> start_lmls_;
    std::vector<KernelParams> start_params_;
};

}  // namespace uso

#endif  // USO_SURROGATE_HPP
