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

#ifndef DELTATUNE_SCHEDULER_HPP_
#define DELTATUNE_SCHEDULER_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "deltatune/delta_stats.hpp"
#include "deltatune/optimizer.hpp"
#include "deltatune/problem.hpp"
#include "deltatune/random.hpp"

namespace deltatune {

// Traffic split for one round. Fractions of all candidates plus the control
// fraction sum to one.
struct RoundPlan {
  std::int64_t round = 0;
  std::vector<std::pair<CandidateId, double>> assignments;  // ascending id
  double control_fraction = 0.0;

  double total() const;
  double fraction(CandidateId id) const;
};

struct ReadingPair {
  GroupReading test;
  GroupReading control;
};

// Metric readings describing `origin_round`, delivered at `arrival_round`.
struct InboundBatch {
  std::int64_t origin_round = 0;
  std::int64_t arrival_round = 0;
  std::vector<ReadingPair> readings;
};

struct BucketState {
  std::vector<HyperParam> candidates;                // insertion order
  std::map<CandidateId, std::int64_t> created_round;

  bool contains(CandidateId id) const { return created_round.count(id) != 0; }
  const HyperParam& at(CandidateId id) const;
  void add(HyperParam candidate, std::int64_t round);
};

// Which hourly statistic enters the record.
enum class SignalMode {
  kDelta,  // test/control ratio minus one
  kRaw,    // test-group metric as is
};

struct InitialBucket {
  enum class Kind { kExplicit, kGrid, kUniform };
  Kind kind = Kind::kGrid;
  std::vector<Vector> points;  // kExplicit
  int grid_per_dim = 10;       // kGrid: nodes per axis, endpoints included
  int count = 100;             // kUniform
};

struct SchedulerConfig {
  std::size_t repetitions = kDefaultRepetitions;
  std::size_t proposal_samples = kDefaultProposalSamples;
  double proposal_probability = 1.0;
  double control_fraction = 0.2;
  TaylorMode taylor_mode = TaylorMode::kDeltaMethod;
  SignalMode signal = SignalMode::kDelta;
  InitialBucket initial;

  // Throws ConfigError on out-of-range values.
  void validate() const;
};

struct SchedulerState {
  BucketState bucket;
  EstimateRecord record;
  // Readings that made it into the record, in absorption order. Replaying
  // the log reproduces the record bit for bit.
  std::vector<ReadingPair> metric_log;
  std::int64_t round = 0;  // next round to run
  std::uint64_t next_id = 1;
  bool exposed = false;    // initial exposure plan has been emitted
  Rng rng;
};

struct RoundOutcome {
  RoundPlan plan;
  std::optional<SelectionResult> selection;  // empty on exposure rounds
  std::optional<HyperParam> proposed;
  std::size_t absorbed = 0;
  std::size_t duplicates = 0;  // first write won, reading dropped
  std::size_t ignored = 0;     // unknown candidate or metric
};

// Builds the initial bucket and the round-0 exposure plan (uniform traffic
// over the bucket, no selection). Ids start at 1; the base is never in the
// bucket.
std::pair<SchedulerState, RoundPlan> bootstrap(const SchedulerConfig& config,
                                               const TuningProblem& problem,
                                               std::uint64_t seed);

// Absorbs whatever arrived (any origin round, any order), selects winners,
// maybe proposes one candidate, and emits the next plan. Never waits for
// missing data. While no candidate has data yet it re-emits the exposure
// plan; calling it before any exposure is a ColdStartError.
RoundOutcome run_round(SchedulerState& state, std::span<const InboundBatch> inbound,
                       const TuningProblem& problem, const SchedulerConfig& config);

// Absorb only; used by run_round and by state restoration.
void absorb_pair(SchedulerState& state, const ReadingPair& pair,
                 const SchedulerConfig& config);

// Proportional split of (1 - control) over pick multiplicities plus one unit
// per newly proposed candidate.
RoundPlan allocate_traffic(std::int64_t round, std::span<const CandidateId> picks,
                           std::span<const CandidateId> proposed,
                           double control_fraction);

// Candidate with the highest multiplicity, ties to the lowest id.
CandidateId modal_pick(std::span<const CandidateId> picks);

}  // namespace deltatune

#endif  // DELTATUNE_SCHEDULER_HPP_
