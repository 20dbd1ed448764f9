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

#ifndef USO_CONFIG_HPP
#define USO_CONFIG_HPP

#include <string>

#include <nlohmann/json.hpp>

#include "uso/orchestrator.hpp"

namespace uso {

/// Experiment config documents (JSON, see docs/config.md). Unknown keys are
/// rejected at every level; relative paths resolve against `base_dir`.
/// All failures throw Error(Config).
ExperimentConfig experiment_config_from_json(const nlohmann::json& j,
                                             const std::string& base_dir);
ExperimentConfig load_experiment_config(const std::string& path);

/// Command-line style override. Keys: mode, seed, iters, init, kappa,
/// advisor-endpoint, mock-advisor, out. Each applied override is recorded
/// under annotations["overrides"]. Throws Error(Config) on bad key/value.
void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value);

}  // namespace uso

#endif  // USO_CONFIG_HPP
