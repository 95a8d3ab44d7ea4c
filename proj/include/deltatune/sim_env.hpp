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

#ifndef DELTATUNE_SIM_ENV_HPP_
#define DELTATUNE_SIM_ENV_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "deltatune/problem.hpp"
#include "deltatune/random.hpp"
#include "deltatune/scheduler.hpp"

namespace deltatune::sim {

inline constexpr int kPeriod = 24;
inline constexpr int kBumpsPerField = 8;
inline constexpr int kHarmonics = 3;
inline constexpr int kNormalizationGrid = 201;
inline constexpr double kLift = 0.1;
inline constexpr double kPatternFloor = 0.1;

struct RadialBump {
  Vector center;  // in [0, 1]^2
  double width = 0.1;
  double amplitude = 1.0;
};

// Sum of radial bumps, min-max normalized over a 201x201 grid of the unit
// square and clamped to [0, 1].
struct DeltaField {
  std::vector<RadialBump> bumps;
  double raw_min = 0.0;
  double raw_max = 1.0;

  double raw(const VectorRef& theta) const;
  double operator()(const VectorRef& theta) const;
};

// Period-24 pattern 1 + sum_h a_h cos(2 pi h t / 24 + phi_h), optionally
// mirrored around its mean as 2 mean(W1) - W1(t) plus one extra harmonic.
// Floored at 0.1.
struct DailyPattern {
  std::array<double, kHarmonics> amplitudes{};
  std::array<double, kHarmonics> phases{};
  bool mirrored = false;
  double mirror_mean = 1.0;  // mean of the unmirrored series
  int extra_harmonic = 1;
  double extra_amplitude = 0.0;
  double extra_phase = 0.0;

  double operator()(std::int64_t t) const;
  double period_mean() const;
};

// How per-hour readings relate to the reported group size.
enum class Sampling {
  // `draws_per_step` per-user draws form the sample statistics and the
  // reading reports that many users, so s^2/N is the variance of the mean.
  kDraws,
  // Sample statistics of round(fraction * users) simulated users, drawn from
  // their exact sampling distributions.
  kPopulation,
  // `draws_per_step` draws form the statistics but the reading reports
  // round(fraction * users) users.
  kDrawsNominalSize,
};

std::string to_string(Sampling s);
Sampling sampling_from_string(const std::string& name);

struct EnvSpec {
  std::uint64_t seed = 0;
  std::array<DeltaField, 2> delta_fields;
  std::array<DailyPattern, 2> patterns;
  double noise_sd = 0.6;
  std::array<double, 4> weights{0.296, 1.165, 0.149, 0.703};
  double threshold = 0.6036;
  std::int64_t fixed_delay = 3;
  double xi_mean = 0.0;
  double xi_sd = 1.0;
  std::int64_t users = 1'000'000;
  int draws_per_step = 50;
  Sampling sampling = Sampling::kDrawsNominalSize;
  Vector base = (Vector(2) << 0.011, 0.985).finished();

  // Expected metric k (0 or 1) at theta and hour t.
  double metric_mean(int k, const VectorRef& theta, std::int64_t t) const;
  // Exact average over one period.
  double period_mean(int k, const VectorRef& theta) const;
  // Ground-truth objective and guardrail on the raw metric scale.
  double objective(const VectorRef& theta) const;
  double guardrail(const VectorRef& theta) const;
};

// Randomly generated landscape with the default constants.
EnvSpec build_env(std::uint64_t seed);

struct GainViolation {
  double gain = 0.0;
  double violation = 0.0;
};

GainViolation true_gain_violation(const EnvSpec& env, const VectorRef& theta);

// Metric names used by the environment.
const std::vector<MetricId>& metric_ids();

// Tuning problem over the environment's two metrics. For SignalMode::kDelta
// the raw-scale objective and guardrail are rewritten exactly in terms of
// the delta metrics using the base's period means, so the objective equals
// the gain. For kRaw they apply to the raw metrics unchanged.
TuningProblem synthetic_problem(const EnvSpec& env, SignalMode signal);

// One simulated hour: a batch per candidate with positive traffic, each
// delayed by fixed_delay + round(|xi|) rounds, xi ~ N(xi_mean, xi_sd) drawn
// per batch. Candidate vectors are looked up in `bucket`.
std::vector<InboundBatch> step(const EnvSpec& env, const RoundPlan& plan,
                               const BucketState& bucket, std::int64_t t, Rng& rng);

// Holds dispatched batches until their arrival round.
class DeliveryQueue {
 public:
  void push(std::vector<InboundBatch> batches);
  // Removes and returns every batch with arrival_round <= round, ordered by
  // (arrival, origin, candidate).
  std::vector<InboundBatch> release(std::int64_t round);
  bool empty() const { return pending_.empty(); }
  std::size_t size() const { return pending_.size(); }
  const std::vector<InboundBatch>& pending() const { return pending_; }

 private:
  std::vector<InboundBatch> pending_;
};

nlohmann::json env_to_json(const EnvSpec& env);
EnvSpec env_from_json(const nlohmann::json& doc);
void save_env(const EnvSpec& env, const std::filesystem::path& path);
EnvSpec load_env(const std::filesystem::path& path);

}  // namespace deltatune::sim

#endif  // DELTATUNE_SIM_ENV_HPP_
