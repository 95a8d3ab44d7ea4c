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

#include "deltatune/delta_stats.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "deltatune/errors.hpp"

namespace deltatune {

namespace {

void check_reading(const GroupReading& r, const char* which) {
  if (!std::isfinite(r.sample_mean) || !std::isfinite(r.sample_var) ||
      r.sample_var < 0.0 || r.group_size < 1) {
    throw InvalidInputError(std::string(which) +
                            " reading: need finite mean, var >= 0, size >= 1");
  }
}

}  // namespace

DeltaStat hourly_delta_stat(const GroupReading& test, const GroupReading& control,
                            TaylorMode mode) {
  if (test.round != control.round || test.metric != control.metric) {
    throw InvalidInputError("hourly_delta_stat: test/control round or metric differ");
  }
  check_reading(test, "test");
  check_reading(control, "control");
  const double mu0 = control.sample_mean;
  if (std::abs(mu0) < kDegenerateBaseThreshold) {
    throw DegenerateBaseError("hourly_delta_stat: control mean ~ 0 for metric " +
                              control.metric);
  }
  const double mu = test.sample_mean;
  const double var = test.sample_var;
  const double var0 = control.sample_var;
  const double n = static_cast<double>(test.group_size);
  const double n0 = static_cast<double>(control.group_size);
  const double mu0_2 = mu0 * mu0;
  const double mu0_3 = mu0_2 * mu0;
  const double mu0_4 = mu0_2 * mu0_2;

  DeltaStat out;
  out.weight = n;
  switch (mode) {
    case TaylorMode::kLiteral:
      out.mean = mu / mu0 + var0 * mu / mu0_3 - 1.0;
      out.var = (mu0_2 * var / n0 + mu * mu * var0 / n) / mu0_4;
      break;
    case TaylorMode::kDeltaMethod:
      out.mean = mu / mu0 + (var0 / n0) * mu / mu0_3 - 1.0;
      out.var = var / (n * mu0_2) + mu * mu * var0 / (n0 * mu0_4);
      break;
  }
  return out;
}

DeltaStat raw_metric_stat(const GroupReading& test) {
  check_reading(test, "test");
  const double n = static_cast<double>(test.group_size);
  return {test.sample_mean, test.sample_var / n, n};
}

DeltaStat aggregate(std::span<const SizedStat> hourly) {
  if (hourly.empty()) throw NoDataError("aggregate: no hourly estimates");
  double sum_n = 0.0;
  double sum_n_mean = 0.0;
  double sum_n2_var = 0.0;
  for (const auto& h : hourly) {
    if (h.size < 1) throw InvalidInputError("aggregate: sizes must be >= 1");
    const double n = static_cast<double>(h.size);
    sum_n += n;
    sum_n_mean += n * h.stat.mean;
    sum_n2_var += n * n * h.stat.var;
  }
  return {sum_n_mean / sum_n, sum_n2_var / (sum_n * sum_n), sum_n};
}

EstimateRecord::EstimateRecord(const EstimateRecord& other) {
  std::shared_lock lock(other.mutex_);
  series_ = other.series_;
}

EstimateRecord& EstimateRecord::operator=(const EstimateRecord& other) {
  if (this == &other) return *this;
  std::map<Key, Series> copy;
  {
    std::shared_lock lock(other.mutex_);
    copy = other.series_;
  }
  std::unique_lock lock(mutex_);
  series_ = std::move(copy);
  return *this;
}

void EstimateRecord::absorb(CandidateId candidate, const std::string& metric,
                            std::int64_t round, const DeltaStat& stat,
                            std::int64_t size) {
  if (size < 1 || !(stat.var >= 0.0) || !std::isfinite(stat.mean) ||
      !std::isfinite(stat.var)) {
    throw InvalidInputError("absorb: need finite stat, var >= 0 and size >= 1");
  }
  std::unique_lock lock(mutex_);
  auto& s = series_[{candidate, metric}];
  const auto pos = std::lower_bound(
      s.entries.begin(), s.entries.end(), round,
      [](const Entry& e, std::int64_t r) { return e.round < r; });
  if (pos != s.entries.end() && pos->round == round) {
    throw ConflictError("absorb: candidate " + std::to_string(candidate.value) +
                        " metric " + metric + " round " + std::to_string(round) +
                        " already absorbed");
  }
  s.entries.insert(pos, Entry{round, stat, size});
  const double n = static_cast<double>(size);
  s.sum_size += n;
  s.sum_size_mean += n * stat.mean;
  s.sum_size2_var += n * n * stat.var;
}

std::optional<DeltaStat> EstimateRecord::aggregate(CandidateId candidate,
                                                   const std::string& metric) const {
  std::shared_lock lock(mutex_);
  const auto it = series_.find({candidate, metric});
  if (it == series_.end() || it->second.entries.empty()) return std::nullopt;
  const auto& s = it->second;
  return DeltaStat{s.sum_size_mean / s.sum_size,
                   s.sum_size2_var / (s.sum_size * s.sum_size), s.sum_size};
}

std::vector<EstimateRecord::Entry> EstimateRecord::history(
    CandidateId candidate, const std::string& metric) const {
  std::shared_lock lock(mutex_);
  const auto it = series_.find({candidate, metric});
  if (it == series_.end()) return {};
  return it->second.entries;
}

bool EstimateRecord::contains(CandidateId candidate, const std::string& metric,
                              std::int64_t round) const {
  std::shared_lock lock(mutex_);
  const auto it = series_.find({candidate, metric});
  if (it == series_.end()) return false;
  return std::any_of(it->second.entries.begin(), it->second.entries.end(),
                     [round](const Entry& e) { return e.round == round; });
}

bool EstimateRecord::has_data(CandidateId candidate,
                              const std::vector<MetricId>& metrics) const {
  std::shared_lock lock(mutex_);
  for (const auto& m : metrics) {
    const auto it = series_.find({candidate, m.name});
    if (it == series_.end() || it->second.entries.empty()) return false;
  }
  return !metrics.empty();
}

std::size_t EstimateRecord::size() const {
  std::shared_lock lock(mutex_);
  std::size_t n = 0;
  for (const auto& [key, s] : series_) n += s.entries.size();
  return n;
}

}  // namespace deltatune
