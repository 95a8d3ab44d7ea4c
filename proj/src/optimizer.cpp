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

#include "deltatune/optimizer.hpp"

#include <algorithm>
#include <limits>

#include "deltatune/errors.hpp"

namespace deltatune {

namespace {

// Running constrained argmax with lowest-index tie-breaking.
class ArgmaxTracker {
 public:
  void offer(std::size_t index, double objective, double slack) {
    if (slack >= 0.0) {
      if (!feasible_ || objective > best_objective_) {
        feasible_ = true;
        best_objective_ = objective;
        best_ = index;
      }
    } else if (!feasible_ && (!any_ || slack > best_slack_)) {
      best_slack_ = slack;
      best_ = index;
    }
    any_ = true;
  }

  bool feasible() const { return feasible_; }
  std::size_t best() const { return best_; }

 private:
  bool any_ = false;
  bool feasible_ = false;
  double best_objective_ = -std::numeric_limits<double>::infinity();
  double best_slack_ = -std::numeric_limits<double>::infinity();
  std::size_t best_ = 0;
};

}  // namespace

std::vector<CandidateId> SelectionResult::picks() const {
  std::vector<CandidateId> all = winners;
  all.insert(all.end(), fallback.begin(), fallback.end());
  return all;
}

std::vector<CandidateBelief> beliefs_from_record(std::span<const HyperParam> bucket,
                                                 const EstimateRecord& record,
                                                 const TuningProblem& problem) {
  const auto m = problem.num_metrics();
  std::vector<CandidateBelief> out;
  for (const auto& hp : bucket) {
    if (!record.has_data(hp.id(), problem.metrics())) continue;
    CandidateBelief b{hp.id(), Vector(m), Vector(m)};
    for (Eigen::Index k = 0; k < m; ++k) {
      const auto agg = record.aggregate(hp.id(), problem.metrics()[static_cast<std::size_t>(k)].name);
      b.mu[k] = agg->mean;
      b.sigma2[k] = agg->var;
    }
    out.push_back(std::move(b));
  }
  std::sort(out.begin(), out.end(),
            [](const CandidateBelief& a, const CandidateBelief& b) { return a.id < b.id; });
  return out;
}

SelectionResult select_from_beliefs(std::vector<CandidateBelief> beliefs,
                                    const TuningProblem& problem, std::size_t repetitions,
                                    Rng& rng) {
  if (beliefs.empty()) throw NoDataError("select: no candidate has data");
  std::sort(beliefs.begin(), beliefs.end(),
            [](const CandidateBelief& a, const CandidateBelief& b) { return a.id < b.id; });
  for (const auto& b : beliefs) {
    if (b.mu.size() != problem.num_metrics() || b.sigma2.size() != problem.num_metrics()) {
      throw InvalidInputError("select: belief dimension does not match problem");
    }
  }

  SelectionResult result;
  result.winners.reserve(repetitions);
  for (std::size_t rep = 0; rep < repetitions; ++rep) {
    ArgmaxTracker tracker;
    for (std::size_t j = 0; j < beliefs.size(); ++j) {
      const Vector delta = sample_delta(beliefs[j], rng);
      tracker.offer(j, evaluate_objective(problem, delta),
                    min_constraint_slack(problem, delta));
    }
    const CandidateId pick = beliefs[tracker.best()].id;
    if (tracker.feasible()) {
      result.winners.push_back(pick);
    } else {
      result.fallback.push_back(pick);
      ++result.infeasible_rounds;
    }
  }
  result.beliefs_used = std::move(beliefs);
  return result;
}

SelectionResult select(std::span<const HyperParam> bucket, const EstimateRecord& record,
                       const TuningProblem& problem, std::size_t repetitions, Rng& rng) {
  if (bucket.empty()) throw InvalidInputError("select: empty bucket");
  return select_from_beliefs(beliefs_from_record(bucket, record, problem), problem,
                             repetitions, rng);
}

ProposalResult propose(const Surrogate& surrogate, const TuningProblem& problem,
                       std::size_t samples, const Bounds& bounds, CandidateId fresh_id,
                       Rng& rng) {
  if (samples == 0) throw InvalidInputError("propose: need at least one sample");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vector> points(samples);
  for (auto& p : points) {
    Vector u(bounds.dim());
    for (Eigen::Index k = 0; k < u.size(); ++k) u[k] = unit(rng);
    p = bounds.from_unit(u);
  }
  return propose_among(surrogate, problem, points, bounds, fresh_id, rng);
}

ProposalResult propose_among(const Surrogate& surrogate, const TuningProblem& problem,
                             std::span<const Vector> points, const Bounds& bounds,
                             CandidateId fresh_id, Rng& rng) {
  if (!surrogate.fitted()) throw InvalidInputError("propose: surrogate not fitted");
  if (points.empty()) throw InvalidInputError("propose: need at least one sample");
  if (surrogate.num_metrics() != problem.num_metrics()) {
    throw InvalidInputError("propose: surrogate/problem metric count mismatch");
  }
  ArgmaxTracker tracker;
  std::size_t feasible = 0;
  for (std::size_t j = 0; j < points.size(); ++j) {
    const CandidateBelief belief = surrogate.predict(points[j]);
    const Vector delta = sample_delta(belief, rng);
    const double slack = min_constraint_slack(problem, delta);
    if (slack >= 0.0) ++feasible;
    tracker.offer(j, evaluate_objective(problem, delta), slack);
  }
  return {HyperParam(fresh_id, points[tracker.best()], bounds), points.size(), feasible};
}

}  // namespace deltatune
