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

#ifndef USO_ACQUISITION_HPP
#define USO_ACQUISITION_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "uso/surrogate.hpp"

namespace uso {

enum class Refinement { QuasiNewton, Coordinate };

struct AcquisitionConfig {
    double kappa = 1.0;
    int n_restarts = 16;
    int refine_steps = 100;
    int mc_samples = 4096;
    std::uint64_t seed = 0;
    Refinement refinement = Refinement::QuasiNewton;

    void validate() const;
};

inline double ucb(double mu, double sigma, double kappa) noexcept { return mu + kappa * sigma; }

struct RankedCandidate {
    std::size_t index;
    double ucb;
    double mu;     // standardized units
    double sigma;  // standardized units
};

/// Candidates by descending UCB (computed in standardized y units), ties by
/// lower index. A permutation of [0, n).
std::vector<RankedCandidate> rank_by_ucb(const GpModel& model,
                                         const std::vector<std::vector<double>>& candidates,
                                         double kappa);

/// Closed-form EI for maximization.
double expected_improvement(double mu, double sigma, double best_y) noexcept;
/// EI at a raw design vector, original y units.
double expected_improvement(const GpModel& model, std::span<const double> x, double best_y);

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

/// Monte-Carlo batch EI, E[max_i max(Y_i - best_y, 0)] under the joint
/// posterior, using cfg.mc_samples draws seeded by cfg.seed.
McEstimate qei_mc(const GpModel& model, const std::vector<std::vector<double>>& batch,
                  double best_y, const AcquisitionConfig& cfg);

/// Maximizes EI over the model's box: quasi-random screening, the best
/// cfg.n_restarts starts refined locally, max with index tie-break. Result
/// is clipped to bounds and deterministic in (model, best_y, cfg).
std::vector<double> propose_bo_point(const GpModel& model, double best_y,
                                     const AcquisitionConfig& cfg);

}  // namespace uso

#endif  // USO_ACQUISITION_HPP
