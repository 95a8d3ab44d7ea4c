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

#ifndef DELTATUNE_PROBLEM_HPP_
#define DELTATUNE_PROBLEM_HPP_

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace deltatune {

using Vector = Eigen::VectorXd;
using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

// Stable identity of a candidate. Equality is by id, never by vector value.
struct CandidateId {
  std::uint64_t value = 0;

  friend auto operator<=>(const CandidateId&, const CandidateId&) = default;
};

// Closed per-coordinate box.
class Bounds {
 public:
  Bounds() = default;
  Bounds(Vector lower, Vector upper);

  // Unit box [0, 1]^dim.
  static Bounds unit(Eigen::Index dim);

  Eigen::Index dim() const { return lower_.size(); }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }

  bool contains(const VectorRef& theta) const;
  // Affine map into [0, 1]^d; degenerate (lower == upper) coordinates map to 0.
  Vector to_unit(const VectorRef& theta) const;
  Vector from_unit(const VectorRef& unit) const;

  friend bool operator==(const Bounds& a, const Bounds& b);

 private:
  Vector lower_;
  Vector upper_;
};

class HyperParam {
 public:
  HyperParam() = default;
  // Throws InvalidInputError when theta is empty, mis-sized or outside bounds.
  HyperParam(CandidateId id, Vector theta, Bounds bounds);

  CandidateId id() const { return id_; }
  const Vector& theta() const { return theta_; }
  const Bounds& bounds() const { return bounds_; }
  Eigen::Index dim() const { return theta_.size(); }

 private:
  CandidateId id_;
  Vector theta_;
  Bounds bounds_;
};

struct MetricId {
  std::string name;

  friend bool operator==(const MetricId&, const MetricId&) = default;
};

// f or g_i over the delta-metric vector. Either a linear form w^T delta or a
// named, registered pure function that declares the number of deltas it reads.
class FunctionExpr {
 public:
  using Fn = std::function<double(const VectorRef&)>;

  static FunctionExpr linear(Vector weights);
  static FunctionExpr composed(std::string name, Eigen::Index arity, Fn fn);

  double operator()(const VectorRef& delta) const;

  Eigen::Index arity() const { return arity_; }
  bool is_linear() const { return !fn_; }
  const Vector& weights() const { return weights_; }
  const std::string& name() const { return name_; }

 private:
  FunctionExpr() = default;

  Vector weights_;
  std::string name_;
  Eigen::Index arity_ = 0;
  Fn fn_;
};

// Named composed functions available to configuration files. Each entry is a
// factory taking the arity the problem declares.
class FunctionRegistry {
 public:
  using Factory = std::function<FunctionExpr::Fn(Eigen::Index arity)>;

  // Registry preloaded with "max", "min" and "sum".
  static FunctionRegistry with_builtins();

  void add(const std::string& name, Factory factory);
  bool contains(const std::string& name) const;
  FunctionExpr make(const std::string& name, Eigen::Index arity) const;

 private:
  std::map<std::string, Factory> factories_;
};

enum class Direction { kAtLeast, kAtMost };

struct ConstraintSpec {
  FunctionExpr g;
  double threshold = 0.0;
  Direction direction = Direction::kAtLeast;
};

// g_i(delta) >= c_i after folding at-most specs into the at-least form.
class NormalizedConstraint {
 public:
  explicit NormalizedConstraint(const ConstraintSpec& spec);

  double value(const VectorRef& delta) const;
  double threshold() const { return sign_ * threshold_; }

 private:
  FunctionExpr g_;
  double threshold_;
  double sign_;
};

struct ConstraintValue {
  double value = 0.0;
  bool satisfied = false;
};

// Objective and guardrails over delta metrics, plus the base candidate.
// Immutable after construction.
class TuningProblem {
 public:
  TuningProblem(std::vector<MetricId> metrics, FunctionExpr objective,
                std::vector<ConstraintSpec> constraints, HyperParam base);

  Eigen::Index num_metrics() const {
    return static_cast<Eigen::Index>(metrics_.size());
  }
  const std::vector<MetricId>& metrics() const { return metrics_; }
  const FunctionExpr& objective() const { return objective_; }
  const std::vector<ConstraintSpec>& constraint_specs() const {
    return specs_;
  }
  const std::vector<NormalizedConstraint>& constraints() const {
    return normalized_;
  }
  const HyperParam& base() const { return base_; }
  const Bounds& bounds() const { return base_.bounds(); }

  // Index of a metric name, or -1.
  Eigen::Index metric_index(const std::string& name) const;

 private:
  std::vector<MetricId> metrics_;
  FunctionExpr objective_;
  std::vector<ConstraintSpec> specs_;
  std::vector<NormalizedConstraint> normalized_;
  HyperParam base_;
};

double evaluate_objective(const TuningProblem& problem, const VectorRef& delta);

std::vector<ConstraintValue> evaluate_constraints(const TuningProblem& problem,
                                                  const VectorRef& delta);

// Smallest normalized slack min_i (g_i(delta) - c_i); +inf with no constraints.
double min_constraint_slack(const TuningProblem& problem,
                            const VectorRef& delta);

// f(theta) / f(theta_0) - 1. Throws UndefinedGainError when f_base == 0.
double gain(double f_theta, double f_base);

// max(c - g(theta), 0).
double violation(double g_theta, double c);

}  // namespace deltatune

#endif  // DELTATUNE_PROBLEM_HPP_
