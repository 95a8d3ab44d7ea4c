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

#ifndef DELTATUNE_DELTA_STATS_HPP_
#define DELTATUNE_DELTA_STATS_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "deltatune/problem.hpp"

namespace deltatune {

// One hour of one metric for one user group.
struct GroupReading {
  CandidateId candidate;
  std::string metric;
  std::int64_t round = 0;
  double sample_mean = 0.0;
  double sample_var = 0.0;  // per-user variance, unbiased
  std::int64_t group_size = 1;
};

// Mean and variance of the delta signal X(theta)/X(theta_0) - 1, either for
// one hour or aggregated over hours. `weight` carries the test-group size
// (hourly) or the accumulated sum of sizes (aggregated).
struct DeltaStat {
  double mean = 0.0;
  double var = 0.0;
  double weight = 0.0;
};

// How the second-order ratio correction pairs variances with group sizes.
//
// kLiteral: mean correction uses the control per-user variance as is and
//   the test variance is divided by the control size (and vice versa).
// kDeltaMethod: each group's variance is scaled by its own size, which is the
//   ratio-of-sample-means delta method.
enum class TaylorMode { kLiteral, kDeltaMethod };

// Control means with |mu_0| below this are rejected.
inline constexpr double kDegenerateBaseThreshold = 1e-9;

DeltaStat hourly_delta_stat(const GroupReading& test, const GroupReading& control,
                            TaylorMode mode = TaylorMode::kDeltaMethod);

// Un-normalized hourly statistic of the test group: (mu_t, s_t^2 / N_t).
DeltaStat raw_metric_stat(const GroupReading& test);

struct SizedStat {
  DeltaStat stat;
  std::int64_t size = 1;
};

// Size-weighted aggregation of hourly estimates:
//   mean = sum N_t mu_t / sum N_t,  var = sum N_t^2 s_t^2 / (sum N_t)^2.
DeltaStat aggregate(std::span<const SizedStat> hourly);

// Per (candidate, metric) history of hourly stats with a running aggregate.
// Absorption is first-write-wins per (candidate, metric, round); rounds may
// arrive out of order and with gaps. Safe for concurrent readers and writers.
class EstimateRecord {
 public:
  struct Entry {
    std::int64_t round = 0;
    DeltaStat hourly;
    std::int64_t size = 1;
  };

  EstimateRecord() = default;
  EstimateRecord(const EstimateRecord& other);
  EstimateRecord& operator=(const EstimateRecord& other);

  // Throws ConflictError (record unchanged) if the key was already absorbed,
  // InvalidInputError on negative variance or non-positive size.
  void absorb(CandidateId candidate, const std::string& metric,
              std::int64_t round, const DeltaStat& stat, std::int64_t size);

  std::optional<DeltaStat> aggregate(CandidateId candidate,
                                     const std::string& metric) const;
  // Entries ordered by round.
  std::vector<Entry> history(CandidateId candidate,
                             const std::string& metric) const;
  bool contains(CandidateId candidate, const std::string& metric,
                std::int64_t round) const;
  // True when every listed metric has at least one absorbed round.
  bool has_data(CandidateId candidate,
                const std::vector<MetricId>& metrics) const;
  std::size_t size() const;

 private:
  struct Series {
    std::vector<Entry> entries;  // sorted by round
    double sum_size = 0.0;
    double sum_size_mean = 0.0;
    double sum_size2_var = 0.0;
  };
  using Key = std::pair<CandidateId, std::string>;

  mutable std::shared_mutex mutex_;
  std::map<Key, Series> series_;
};

}  // namespace deltatune

#endif  // DELTATUNE_DELTA_STATS_HPP_
