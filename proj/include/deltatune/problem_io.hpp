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

#ifndef DELTATUNE_PROBLEM_IO_HPP_
#define DELTATUNE_PROBLEM_IO_HPP_

#include <filesystem>

#include <json.hpp>

#include "deltatune/problem.hpp"

namespace deltatune {

// Problem definition file (JSON):
//
//   {
//     "metrics":     ["view_count", "watch_time"],
//     "objective":   {"linear": [0.296, 1.165]}     | {"composed": "max"},
//     "constraints": [{"linear": [0.149, 0.703], "threshold": 0.6036,
//                      "direction": "at-least"}],     // or "at-most"
//     "bounds":      {"lower": [0, 0], "upper": [1, 1]},
//     "base":        [0.011, 0.985]
//   }
//
// Composed functions are resolved by name through the registry. Numbers are
// written in shortest round-trip form, so save(load(x)) is lossless.
TuningProblem problem_from_json(
    const nlohmann::json& doc,
    const FunctionRegistry& registry = FunctionRegistry::with_builtins());

nlohmann::json problem_to_json(const TuningProblem& problem);

TuningProblem load_problem(
    const std::filesystem::path& path,
    const FunctionRegistry& registry = FunctionRegistry::with_builtins());

void save_problem(const TuningProblem& problem, const std::filesystem::path& path);

Vector vector_from_json(const nlohmann::json& array);
nlohmann::json vector_to_json(const VectorRef& v);

}  // namespace deltatune

#endif  // DELTATUNE_PROBLEM_IO_HPP_
