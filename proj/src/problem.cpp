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

#include "deltatune/problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "deltatune/errors.hpp"

namespace deltatune {

Bounds::Bounds(Vector lower, Vector upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() == 0 || lower_.size() != upper_.size()) {
    throw InvalidInputError("bounds: lower/upper must be non-empty and of equal size");
  }
  if (!lower_.allFinite() || !upper_.allFinite() ||
      (lower_.array() > upper_.array()).any()) {
    throw InvalidInputError("bounds: require finite lower <= upper");
  }
}

Bounds Bounds::unit(Eigen::Index dim) {
  return Bounds(Vector::Zero(dim), Vector::Ones(dim));
}

bool Bounds::contains(const VectorRef& theta) const {
  return theta.size() == dim() && theta.allFinite() &&
         (theta.array() >= lower_.array()).all() &&
         (theta.array() <= upper_.array()).all();
}

Vector Bounds::to_unit(const VectorRef& theta) const {
  Vector out(dim());
  for (Eigen::Index k = 0; k < dim(); ++k) {
    const double width = upper_[k] - lower_[k];
    out[k] = width > 0.0 ? (theta[k] - lower_[k]) / width : 0.0;
  }
  return out;
}

Vector Bounds::from_unit(const VectorRef& unit) const {
  Vector out = lower_.array() + unit.array() * (upper_ - lower_).array();
  // Rounding can push a coordinate a hair past the upper face.
  return out.cwiseMax(lower_).cwiseMin(upper_);
}

bool operator==(const Bounds& a, const Bounds& b) {
  return a.lower_.size() == b.lower_.size() && a.lower_ == b.lower_ &&
         a.upper_ == b.upper_;
}

HyperParam::HyperParam(CandidateId id, Vector theta, Bounds bounds)
    : id_(id), theta_(std::move(theta)), bounds_(std::move(bounds)) {
  if (theta_.size() == 0) {
    throw InvalidInputError("hyperparam: empty theta");
  }
  if (!bounds_.contains(theta_)) {
    throw InvalidInputError("hyperparam " + std::to_string(id_.value) +
                            ": theta outside its bounds");
  }
}

FunctionExpr FunctionExpr::linear(Vector weights) {
  if (weights.size() == 0 || !weights.allFinite()) {
    throw InvalidInputError("linear form: weights must be finite and non-empty");
  }
  FunctionExpr expr;
  expr.arity_ = weights.size();
  expr.weights_ = std::move(weights);
  expr.name_ = "linear";
  return expr;
}

FunctionExpr FunctionExpr::composed(std::string name, Eigen::Index arity, Fn fn) {
  if (arity <= 0 || !fn) {
    throw InvalidInputError("composed form '" + name +
                            "': needs positive arity and a callable");
  }
  FunctionExpr expr;
  expr.name_ = std::move(name);
  expr.arity_ = arity;
  expr.fn_ = std::move(fn);
  return expr;
}

double FunctionExpr::operator()(const VectorRef& delta) const {
  if (delta.size() != arity_) {
    throw InvalidInputError("function '" + name_ + "' expects " +
                            std::to_string(arity_) + " deltas, got " +
                            std::to_string(delta.size()));
  }
  if (fn_) return fn_(delta);
  return weights_.dot(delta);
}

FunctionRegistry FunctionRegistry::with_builtins() {
  FunctionRegistry registry;
  registry.add("max", [](Eigen::Index) {
    return FunctionExpr::Fn([](const VectorRef& d) { return d.maxCoeff(); });
  });
  registry.add("min", [](Eigen::Index) {
    return FunctionExpr::Fn([](const VectorRef& d) { return d.minCoeff(); });
  });
  registry.add("sum", [](Eigen::Index) {
    return FunctionExpr::Fn([](const VectorRef& d) { return d.sum(); });
  });
  return registry;
}

void FunctionRegistry::add(const std::string& name, Factory factory) {
  if (name.empty() || name == "linear") {
    throw InvalidInputError("registry: reserved or empty function name");
  }
  factories_[name] = std::move(factory);
}

bool FunctionRegistry::contains(const std::string& name) const {
  return factories_.count(name) != 0;
}

FunctionExpr FunctionRegistry::make(const std::string& name,
                                    Eigen::Index arity) const {
  const auto it = factories_.find(name);
  if (it == factories_.end()) {
    throw ConfigError("unknown composed function '" + name + "'");
  }
  return FunctionExpr::composed(name, arity, it->second(arity));
}

NormalizedConstraint::NormalizedConstraint(const ConstraintSpec& spec)
    : g_(spec.g),
      threshold_(spec.threshold),
      sign_(spec.direction == Direction::kAtMost ? -1.0 : 1.0) {
  if (!std::isfinite(threshold_)) {
    throw InvalidInputError("constraint threshold must be finite");
  }
}

double NormalizedConstraint::value(const VectorRef& delta) const {
  return sign_ * g_(delta);
}

TuningProblem::TuningProblem(std::vector<MetricId> metrics,
                             FunctionExpr objective,
                             std::vector<ConstraintSpec> constraints,
                             HyperParam base)
    : metrics_(std::move(metrics)),
      objective_(std::move(objective)),
      specs_(std::move(constraints)),
      base_(std::move(base)) {
  if (metrics_.empty()) {
    throw InvalidInputError("problem: at least one metric required");
  }
  std::set<std::string> seen;
  for (const auto& m : metrics_) {
    if (m.name.empty() || !seen.insert(m.name).second) {
      throw InvalidInputError("problem: metric names must be unique and non-empty");
    }
  }
  const auto count = num_metrics();
  if (objective_.arity() != count) {
    throw InvalidInputError("problem: objective arity does not match metric count");
  }
  normalized_.reserve(specs_.size());
  for (const auto& spec : specs_) {
    if (spec.g.arity() != count) {
      throw InvalidInputError("problem: constraint arity does not match metric count");
    }
    normalized_.emplace_back(spec);
  }
}

Eigen::Index TuningProblem::metric_index(const std::string& name) const {
  for (std::size_t i = 0; i < metrics_.size(); ++i) {
    if (metrics_[i].name == name) return static_cast<Eigen::Index>(i);
  }
  return -1;
}

namespace {

void check_delta(const TuningProblem& problem, const VectorRef& delta) {
  if (delta.size() != problem.num_metrics()) {
    throw InvalidInputError("delta has " + std::to_string(delta.size()) +
                            " entries, problem has " +
                            std::to_string(problem.num_metrics()) + " metrics");
  }
  if (!delta.allFinite()) {
    throw InvalidInputError("delta has non-finite entries");
  }
}

}  // namespace

double evaluate_objective(const TuningProblem& problem, const VectorRef& delta) {
  check_delta(problem, delta);
  return problem.objective()(delta);
}

std::vector<ConstraintValue> evaluate_constraints(const TuningProblem& problem,
                                                  const VectorRef& delta) {
  check_delta(problem, delta);
  std::vector<ConstraintValue> out;
  out.reserve(problem.constraints().size());
  for (const auto& c : problem.constraints()) {
    const double value = c.value(delta);
    out.push_back({value, value >= c.threshold()});
  }
  return out;
}

double min_constraint_slack(const TuningProblem& problem,
                            const VectorRef& delta) {
  double slack = std::numeric_limits<double>::infinity();
  for (const auto& c : problem.constraints()) {
    slack = std::min(slack, c.value(delta) - c.threshold());
  }
  return slack;
}

double gain(double f_theta, double f_base) {
  if (f_base == 0.0) {
    throw UndefinedGainError("gain: base objective is zero");
  }
  return f_theta / f_base - 1.0;
}

double violation(double g_theta, double c) { return std::max(c - g_theta, 0.0); }

}  // namespace deltatune
