/*
 * Copyright 2026 The deltatune Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DELTATUNE_STORAGE_HPP_
#define DELTATUNE_STORAGE_HPP_

#include <filesystem>
#include <string>

#include <json.hpp>

#include "deltatune/problem.hpp"
#include "deltatune/scheduler.hpp"

namespace deltatune {

// File-backed scheduler state. A state directory holds:
//
//   manifest.json    format tag, version, round counter, next id, rng state,
//                    config snapshot, problem definition
//   hyperparams.tsv  candidate_id, theta_1..theta_d, created_round
//   metrics.tsv      candidate_id, metric, round, test_mean, test_var,
//                    test_size, control_mean, control_var, control_size;
//                    one row per absorbed reading, in absorption order
//   estimates.tsv    derived: candidate_id, metric, kind (hourly|aggregate),
//                    round, mean, var, weight
//
// Tab separated, one header line each; numbers in shortest round-trip form.
inline constexpr int kStateFormatVersion = 1;

struct StateSnapshot {
  SchedulerState state;
  SchedulerConfig config;
  TuningProblem problem;
};

void persist(const SchedulerState& state, const SchedulerConfig& config,
             const TuningProblem& problem, const std::filesystem::path& dir);

// Throws RestoreError on missing, corrupt or version-mismatched files.
StateSnapshot restore(const std::filesystem::path& dir,
                      const FunctionRegistry& registry = FunctionRegistry::with_builtins());

nlohmann::json config_to_json(const SchedulerConfig& config);
SchedulerConfig config_from_json(const nlohmann::json& doc);

std::string to_string(TaylorMode mode);
TaylorMode taylor_mode_from_string(const std::string& name);

}  // namespace deltatune

#endif  // DELTATUNE_STORAGE_HPP_
