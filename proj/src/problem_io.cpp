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

#include "deltatune/problem_io.hpp"

#include "deltatune/errors.hpp"
#include "deltatune/text_io.hpp"

namespace deltatune {

using nlohmann::json;

Vector vector_from_json(const json& array) {
  if (!array.is_array()) throw ConfigError("expected a numeric array");
  Vector v(static_cast<Eigen::Index>(array.size()));
  for (std::size_t i = 0; i < array.size(); ++i) {
    if (!array[i].is_number()) throw ConfigError("expected a numeric array");
    v[static_cast<Eigen::Index>(i)] = array[i].get<double>();
  }
  return v;
}

json vector_to_json(const VectorRef& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

namespace {

FunctionExpr function_from_json(const json& node, Eigen::Index arity,
                                 const FunctionRegistry& registry) {
  if (node.contains("linear")) {
    return FunctionExpr::linear(vector_from_json(node.at("linear")));
  }
  if (node.contains("composed")) {
    return registry.make(node.at("composed").get<std::string>(), arity);
  }
  throw ConfigError("function needs a 'linear' or 'composed' key");
}

json function_to_json(const FunctionExpr& fn) {
  if (fn.is_linear()) return json{{"linear", vector_to_json(fn.weights())}};
  return json{{"composed", fn.name()}};
}

}  // namespace

TuningProblem problem_from_json(const json& doc,
                                const FunctionRegistry& registry) {
  try {
    std::vector<MetricId> metrics;
    for (const auto& name : doc.at("metrics")) {
      metrics.push_back({name.get<std::string>()});
    }
    const auto arity = static_cast<Eigen::Index>(metrics.size());
    auto objective = function_from_json(doc.at("objective"), arity, registry);

    std::vector<ConstraintSpec> constraints;
    if (doc.contains("constraints")) {
      for (const auto& node : doc.at("constraints")) {
        const auto dir = node.value("direction", std::string("at-least"));
        if (dir != "at-least" && dir != "at-most") {
          throw ConfigError("constraint direction must be at-least or at-most");
        }
        constraints.push_back(
            {function_from_json(node, arity, registry),
             node.at("threshold").get<double>(),
             dir == "at-most" ? Direction::kAtMost : Direction::kAtLeast});
      }
    }
    const auto& b = doc.at("bounds");
    Bounds bounds(vector_from_json(b.at("lower")), vector_from_json(b.at("upper")));
    HyperParam base(CandidateId{0}, vector_from_json(doc.at("base")), bounds);
    return TuningProblem(std::move(metrics), std::move(objective),
                         std::move(constraints), std::move(base));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("problem file: ") + e.what());
  } catch (const InvalidInputError& e) {
    throw ConfigError(std::string("problem file: ") + e.what());
  }
}

json problem_to_json(const TuningProblem& problem) {
  json doc;
  doc["metrics"] = json::array();
  for (const auto& m : problem.metrics()) doc["metrics"].push_back(m.name);
  doc["objective"] = function_to_json(problem.objective());
  doc["constraints"] = json::array();
  for (const auto& spec : problem.constraint_specs()) {
    json node = function_to_json(spec.g);
    node["threshold"] = spec.threshold;
    node["direction"] =
        spec.direction == Direction::kAtMost ? "at-most" : "at-least";
    doc["constraints"].push_back(node);
  }
  doc["bounds"] = {{"lower", vector_to_json(problem.bounds().lower())},
                   {"upper", vector_to_json(problem.bounds().upper())}};
  doc["base"] = vector_to_json(problem.base().theta());
  return doc;
}

TuningProblem load_problem(const std::filesystem::path& path,
                           const FunctionRegistry& registry) {
  json doc;
  try {
    doc = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return problem_from_json(doc, registry);
}

void save_problem(const TuningProblem& problem, const std::filesystem::path& path) {
  io::write_file_atomic(path, problem_to_json(problem).dump(2) + "\n");
}

}  // namespace deltatune
