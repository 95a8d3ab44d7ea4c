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

#include "deltatune/scheduler.hpp"

#include <algorithm>
#include <cmath>

#include "deltatune/errors.hpp"
#include "deltatune/gp.hpp"

namespace deltatune {

double RoundPlan::total() const {
  double sum = control_fraction;
  for (const auto& [id, f] : assignments) sum += f;
  return sum;
}

double RoundPlan::fraction(CandidateId id) const {
  for (const auto& [cid, f] : assignments) {
    if (cid == id) return f;
  }
  return 0.0;
}

const HyperParam& BucketState::at(CandidateId id) const {
  for (const auto& c : candidates) {
    if (c.id() == id) return c;
  }
  throw InvalidInputError("bucket: unknown candidate " + std::to_string(id.value));
}

void BucketState::add(HyperParam candidate, std::int64_t round) {
  if (candidate.id().value == 0) {
    throw InvalidInputError("bucket: id 0 is reserved for the base");
  }
  if (!created_round.emplace(candidate.id(), round).second) {
    throw InvalidInputError("bucket: duplicate candidate id " +
                            std::to_string(candidate.id().value));
  }
  candidates.push_back(std::move(candidate));
}

void SchedulerConfig::validate() const {
  if (repetitions == 0) throw ConfigError("repetitions (K) must be >= 1");
  if (proposal_samples == 0) throw ConfigError("proposal samples (N) must be >= 1");
  if (!(proposal_probability >= 0.0 && proposal_probability <= 1.0)) {
    throw ConfigError("proposal probability p must lie in [0, 1]");
  }
  if (!(control_fraction > 0.0 && control_fraction < 1.0)) {
    throw ConfigError("control fraction must lie in (0, 1)");
  }
  switch (initial.kind) {
    case InitialBucket::Kind::kExplicit:
      if (initial.points.empty()) throw ConfigError("explicit initial bucket is empty");
      break;
    case InitialBucket::Kind::kGrid:
      if (initial.grid_per_dim < 1) throw ConfigError("grid needs >= 1 node per axis");
      break;
    case InitialBucket::Kind::kUniform:
      if (initial.count < 1) throw ConfigError("uniform initial bucket needs >= 1 point");
      break;
  }
}

namespace {

std::vector<Vector> grid_points(const Bounds& bounds, int per_dim) {
  const auto d = bounds.dim();
  std::vector<Vector> out;
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  while (true) {
    Vector u(d);
    for (Eigen::Index k = 0; k < d; ++k) {
      u[k] = per_dim == 1 ? 0.5
                          : static_cast<double>(idx[static_cast<std::size_t>(k)]) /
                                (per_dim - 1);
    }
    out.push_back(bounds.from_unit(u));
    // Last coordinate varies fastest.
    Eigen::Index k = d - 1;
    while (k >= 0 && ++idx[static_cast<std::size_t>(k)] == per_dim) {
      idx[static_cast<std::size_t>(k)] = 0;
      --k;
    }
    if (k < 0) return out;
  }
}

}  // namespace

std::pair<SchedulerState, RoundPlan> bootstrap(const SchedulerConfig& config,
                                               const TuningProblem& problem,
                                               std::uint64_t seed) {
  config.validate();
  SchedulerState state;
  state.rng.seed(seed);
  const Bounds& bounds = problem.bounds();

  std::vector<Vector> points;
  switch (config.initial.kind) {
    case InitialBucket::Kind::kExplicit:
      points = config.initial.points;
      break;
    case InitialBucket::Kind::kGrid:
      points = grid_points(bounds, config.initial.grid_per_dim);
      break;
    case InitialBucket::Kind::kUniform: {
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (int i = 0; i < config.initial.count; ++i) {
        Vector u(bounds.dim());
        for (Eigen::Index k = 0; k < u.size(); ++k) u[k] = unit(state.rng);
        points.push_back(bounds.from_unit(u));
      }
      break;
    }
  }
  for (auto& p : points) {
    if (!bounds.contains(p)) throw ConfigError("initial candidate outside bounds");
    state.bucket.add(HyperParam(CandidateId{state.next_id++}, std::move(p), bounds), 0);
  }

  std::vector<CandidateId> ids;
  for (const auto& c : state.bucket.candidates) ids.push_back(c.id());
  RoundPlan plan = allocate_traffic(0, ids, {}, config.control_fraction);
  state.exposed = true;
  state.round = 1;
  return {std::move(state), std::move(plan)};
}

void absorb_pair(SchedulerState& state, const ReadingPair& pair,
                 const SchedulerConfig& config) {
  const auto& test = pair.test;
  const DeltaStat stat = config.signal == SignalMode::kDelta
                             ? hourly_delta_stat(test, pair.control, config.taylor_mode)
                             : raw_metric_stat(test);
  state.record.absorb(test.candidate, test.metric, test.round, stat, test.group_size);
  state.metric_log.push_back(pair);
}

RoundPlan allocate_traffic(std::int64_t round, std::span<const CandidateId> picks,
                           std::span<const CandidateId> proposed,
                           double control_fraction) {
  std::map<CandidateId, double> units;
  for (const auto id : picks) units[id] += 1.0;
  for (const auto id : proposed) units[id] += 1.0;
  double total = 0.0;
  for (const auto& [id, u] : units) total += u;

  RoundPlan plan;
  plan.round = round;
  if (total == 0.0) {
    plan.control_fraction = 1.0;
    return plan;
  }
  plan.control_fraction = control_fraction;
  const double share = 1.0 - control_fraction;
  for (const auto& [id, u] : units) plan.assignments.emplace_back(id, share * u / total);
  return plan;
}

CandidateId modal_pick(std::span<const CandidateId> picks) {
  if (picks.empty()) throw NoDataError("modal_pick: no picks");
  std::map<CandidateId, std::size_t> counts;
  for (const auto id : picks) ++counts[id];
  CandidateId best = counts.begin()->first;
  std::size_t best_count = 0;
  for (const auto& [id, n] : counts) {
    if (n > best_count) {
      best = id;
      best_count = n;
    }
  }
  return best;
}

RoundOutcome run_round(SchedulerState& state, std::span<const InboundBatch> inbound,
                       const TuningProblem& problem, const SchedulerConfig& config) {
  RoundOutcome out;
  const std::int64_t t = state.round;

  for (const auto& batch : inbound) {
    for (const auto& pair : batch.readings) {
      if (!state.bucket.contains(pair.test.candidate) ||
          problem.metric_index(pair.test.metric) < 0) {
        ++out.ignored;
        continue;
      }
      if (state.record.contains(pair.test.candidate, pair.test.metric, pair.test.round)) {
        ++out.duplicates;
        continue;
      }
      absorb_pair(state, pair, config);
      ++out.absorbed;
    }
  }

  auto beliefs = beliefs_from_record(state.bucket.candidates, state.record, problem);
  if (beliefs.empty()) {
    if (!state.exposed) {
      throw ColdStartError("run_round: no data and the bucket was never exposed");
    }
    // Feedback still in flight: keep exposing the whole bucket.
    std::vector<CandidateId> ids;
    for (const auto& c : state.bucket.candidates) ids.push_back(c.id());
    out.plan = allocate_traffic(t, ids, {}, config.control_fraction);
    state.round = t + 1;
    return out;
  }

  std::vector<HyperParam> with_data;
  for (const auto& b : beliefs) with_data.push_back(state.bucket.at(b.id));

  SelectionResult selection =
      select_from_beliefs(beliefs, problem, config.repetitions, state.rng);

  std::vector<CandidateId> proposed_ids;
  std::bernoulli_distribution gate(config.proposal_probability);
  if (gate(state.rng)) {
    const Surrogate surrogate = Surrogate::fit(with_data, selection.beliefs_used);
    ProposalResult proposal =
        propose(surrogate, problem, config.proposal_samples, problem.bounds(),
                CandidateId{state.next_id}, state.rng);
    ++state.next_id;
    proposed_ids.push_back(proposal.proposed.id());
    state.bucket.add(proposal.proposed, t);
    out.proposed = std::move(proposal.proposed);
  }

  const auto picks = selection.picks();
  out.plan = allocate_traffic(t, picks, proposed_ids, config.control_fraction);
  out.selection = std::move(selection);
  state.round = t + 1;
  return out;
}

}  // namespace deltatune
