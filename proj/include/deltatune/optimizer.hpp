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

#ifndef DELTATUNE_OPTIMIZER_HPP_
#define DELTATUNE_OPTIMIZER_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "deltatune/delta_stats.hpp"
#include "deltatune/gp.hpp"
#include "deltatune/problem.hpp"
#include "deltatune/random.hpp"

namespace deltatune {

inline constexpr std::size_t kDefaultRepetitions = 1000;
inline constexpr std::size_t kDefaultProposalSamples = 600;

// Outcome of K Thompson-sampling repetitions over the bucket.
//
// A repetition whose feasible set is empty falls back to the candidate with
// the largest worst-constraint slack; that pick lands in `fallback` instead of
// `winners`, so winners.size() + fallback.size() == K.
struct SelectionResult {
  std::vector<CandidateId> winners;
  std::vector<CandidateId> fallback;
  std::vector<CandidateBelief> beliefs_used;  // ascending id
  std::size_t infeasible_rounds = 0;

  // All K picks, feasible first; this multiset drives traffic.
  std::vector<CandidateId> picks() const;
};

struct ProposalResult {
  HyperParam proposed;
  std::size_t sampled_count = 0;
  std::size_t feasible_count = 0;
};

// Aggregated beliefs for every bucket member with data on all metrics,
// ordered by ascending id.
std::vector<CandidateBelief> beliefs_from_record(std::span<const HyperParam> bucket,
                                                 const EstimateRecord& record,
                                                 const TuningProblem& problem);

// Thompson-sampling selection over explicit beliefs (ascending id order is
// the tie-break order). Throws NoDataError on an empty belief list.
SelectionResult select_from_beliefs(std::vector<CandidateBelief> beliefs,
                                    const TuningProblem& problem, std::size_t repetitions,
                                    Rng& rng);

// Candidates without data are skipped; NoDataError if none has data.
SelectionResult select(std::span<const HyperParam> bucket, const EstimateRecord& record,
                       const TuningProblem& problem, std::size_t repetitions, Rng& rng);

// Samples `samples` points uniformly in `bounds`, scores one posterior draw
// per point and returns the constrained argmax (same fallback as select)
// under the id `fresh_id`.
ProposalResult propose(const Surrogate& surrogate, const TuningProblem& problem,
                       std::size_t samples, const Bounds& bounds, CandidateId fresh_id,
                       Rng& rng);

// Same scoring over caller-supplied points, which must lie in `bounds`.
ProposalResult propose_among(const Surrogate& surrogate, const TuningProblem& problem,
                             std::span<const Vector> points, const Bounds& bounds,
                             CandidateId fresh_id, Rng& rng);

}  // namespace deltatune

#endif  // DELTATUNE_OPTIMIZER_HPP_
