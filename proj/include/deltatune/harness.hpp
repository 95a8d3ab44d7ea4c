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

#ifndef DELTATUNE_HARNESS_HPP_
#define DELTATUNE_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "deltatune/scheduler.hpp"
#include "deltatune/sim_env.hpp"
#include "deltatune/storage.hpp"

namespace deltatune::harness {

// Ablation presets.
enum class Variant {
  kFull,
  kRawMetric,    // hourly statistics on X directly, no control division
  kSynchronous,  // decide only once every dispatched batch has arrived
  kNoProposal,   // p = 0
};

std::string to_string(Variant v);
Variant variant_from_string(const std::string& name);

// First ten entries of the fifty-seed list used for the synthetic study.
const std::vector<std::uint64_t>& default_seeds();
const std::vector<std::uint64_t>& reference_seeds();

// Environment constants that may be overridden per campaign.
struct EnvOverrides {
  std::optional<std::int64_t> fixed_delay;
  std::optional<double> xi_mean;
  std::optional<double> xi_sd;
  std::optional<std::int64_t> users;
  std::optional<int> draws_per_step;
  std::optional<double> noise_sd;
  std::optional<sim::Sampling> sampling;

  void apply(sim::EnvSpec& env) const;
};

struct ExperimentConfig {
  Variant variant = Variant::kFull;
  std::vector<std::uint64_t> seeds = default_seeds();
  int rounds = 30;
  SchedulerConfig scheduler;
  EnvOverrides env;
  std::filesystem::path output_dir;
  // When set, each seed's runner is saved here every `checkpoint_every`
  // rounds and an existing checkpoint is resumed instead of starting over.
  std::filesystem::path checkpoint_dir;
  int checkpoint_every = 1;
  int threads = 1;

  // Scheduler settings after applying the variant preset.
  SchedulerConfig effective_scheduler() const;
  bool synchronous() const { return variant == Variant::kSynchronous; }
  // Throws ConfigError before anything runs.
  void validate() const;
};

nlohmann::json experiment_to_json(const ExperimentConfig& config);
// Keys present in `doc` override the corresponding fields of `base`.
ExperimentConfig experiment_from_json(const nlohmann::json& doc, ExperimentConfig base = {});

struct RoundRecord {
  std::int64_t round = 0;
  CandidateId winner;  // id 0: the base (no decision yet)
  Vector theta;
  double gain = 0.0;
  double violation = 0.0;
};

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<RoundRecord> rounds;
  double final_gain = 0.0;
  double final_violation = 0.0;
};

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& values);

struct RunReport {
  Variant variant = Variant::kFull;
  int rounds = 0;
  std::vector<SeedRun> runs;  // in seed-list order

  std::vector<std::uint64_t> seeds() const;
  MeanSe gain_at(int round) const;
  MeanSe violation_at(int round) const;
  MeanSe final_gain() const;
  MeanSe final_violation() const;
};

// One seed of one variant, advanced a wall round at a time. The whole
// runner (scheduler state, environment, in-flight batches, rng streams,
// trajectory) can be checkpointed and resumed.
class SeedRunner {
 public:
  SeedRunner(const ExperimentConfig& config, std::uint64_t seed);

  bool done() const { return wall_round_ >= config_.rounds; }
  std::int64_t wall_round() const { return wall_round_; }
  void advance();
  void run_to_end();

  SeedRun result() const;
  const sim::EnvSpec& env() const { return env_; }
  const SchedulerState& state() const { return state_; }
  const TuningProblem& problem() const { return problem_; }
  const SchedulerConfig& scheduler_config() const { return scheduler_; }

  void save(const std::filesystem::path& dir) const;
  static SeedRunner load(const std::filesystem::path& dir, const ExperimentConfig& config);

 private:
  SeedRunner(const ExperimentConfig& config, std::uint64_t seed, sim::EnvSpec env,
             StateSnapshot snapshot);
  void record(CandidateId winner);
  void dispatch(const RoundPlan& plan);

  ExperimentConfig config_;
  SchedulerConfig scheduler_;
  std::uint64_t seed_;
  sim::EnvSpec env_;
  TuningProblem problem_;
  SchedulerState state_;
  Rng env_rng_;
  sim::DeliveryQueue queue_;
  std::vector<InboundBatch> arrived_;  // released but not yet absorbed
  std::int64_t wall_round_ = 0;
  CandidateId current_;
  std::vector<RoundRecord> records_;
};

// Runs every seed. When output_dir is set, writes trajectories_<variant>.tsv,
// envs/env_<seed>.json and states/<variant>/seed_<seed>/ there.
RunReport run_experiment(const ExperimentConfig& config);

// Trajectory file round trip: seed, round, winner_id, theta_1, theta_2,
// gain, violation.
void write_trajectories(const RunReport& report, const std::filesystem::path& path);
RunReport read_trajectories(const std::filesystem::path& path, Variant variant);

struct ComparisonRow {
  Variant variant = Variant::kFull;
  std::optional<int> rounds_to_threshold;  // empty: never reached
  double rounds_ratio = 0.0;               // vs reference; inf if never reached
  double final_gain = 0.0;
  double final_gain_delta = 0.0;           // variant - reference
  double final_violation_delta = 0.0;
  int reference_better = 0;                // seeds with reference final gain > variant's
  int seeds = 0;
};

// Compares every report against reports.front(). The threshold is
// `fraction` of the reference's final mean gain. Throws InvalidInputError
// on fewer than two reports or mismatched seed lists.
std::vector<ComparisonRow> compare_variants(const std::vector<RunReport>& reports,
                                            double fraction = 0.8);
std::string comparison_table(const std::vector<ComparisonRow>& rows);

// series_<variant>.tsv per report (round, mean_gain, se_gain, mean_violation,
// se_violation) and summary.tsv with one row per report.
void emit_series(const std::vector<RunReport>& reports, const std::filesystem::path& dir);

}  // namespace deltatune::harness

#endif  // DELTATUNE_HARNESS_HPP_
