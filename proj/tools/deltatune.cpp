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

// Command-line driver for synthetic tuning campaigns.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "deltatune/errors.hpp"
#include "deltatune/harness.hpp"
#include "deltatune/problem_io.hpp"
#include "deltatune/storage.hpp"
#include "deltatune/text_io.hpp"

namespace fs = std::filesystem;
using namespace deltatune;
using namespace deltatune::harness;

namespace {

struct CommonFlags {
  std::string config_file;
  std::vector<std::uint64_t> seeds;
  std::optional<std::size_t> num_seeds;
  std::optional<int> rounds;
  std::optional<std::size_t> repetitions;
  std::optional<std::size_t> samples;
  std::optional<double> proposal_probability;
  std::optional<double> control_fraction;
  std::optional<std::string> taylor_mode;
  std::optional<std::int64_t> tau;
  std::optional<double> xi_mean;
  std::optional<double> xi_sd;
  std::optional<std::int64_t> users;
  std::optional<int> draws;
  std::optional<double> noise_sd;
  std::optional<std::string> sampling;
  std::string checkpoint_dir;
  std::optional<int> checkpoint_every;
  std::optional<int> threads;
  std::string out;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "JSON experiment config; its keys override flags");
    app->add_option("--seeds", seeds, "Explicit seed list")->delimiter(',');
    app->add_option("--num-seeds", num_seeds, "Use the first n reference seeds (max 50)");
    app->add_option("-T,--rounds", rounds, "Rounds per run");
    app->add_option("-K,--repetitions", repetitions, "Thompson-sampling repetitions per round");
    app->add_option("-N,--samples", samples, "Random candidates scored per proposal");
    app->add_option("-p,--proposal-prob", proposal_probability, "Proposal probability");
    app->add_option("--control-fraction", control_fraction, "Traffic share of the control");
    app->add_option("--taylor-mode", taylor_mode, "literal or delta-method");
    app->add_option("--tau", tau, "Fixed reporting delay in rounds");
    app->add_option("--xi-mean", xi_mean, "Mean of the random delay term");
    app->add_option("--xi-sd", xi_sd, "Standard deviation of the random delay term");
    app->add_option("--users", users, "Simulated population size");
    app->add_option("--draws", draws, "Per-hour draws per group");
    app->add_option("--noise-sd", noise_sd, "Per-user noise standard deviation");
    app->add_option("--sampling", sampling, "draws, population or draws-nominal-size");
    app->add_option("--checkpoint-dir", checkpoint_dir, "Save and resume per-seed runners here");
    app->add_option("--checkpoint-every", checkpoint_every, "Rounds between checkpoints");
    app->add_option("--threads", threads, "Worker threads over seeds");
    app->add_option("-o,--out", out, "Output directory")->required();
  }

  ExperimentConfig build(Variant variant) const {
    ExperimentConfig c;
    c.variant = variant;
    if (num_seeds) {
      if (*num_seeds > reference_seeds().size()) throw ConfigError("at most 50 reference seeds");
      c.seeds.assign(reference_seeds().begin(),
                     reference_seeds().begin() + static_cast<std::ptrdiff_t>(*num_seeds));
    }
    if (!seeds.empty()) c.seeds = seeds;
    if (rounds) c.rounds = *rounds;
    if (repetitions) c.scheduler.repetitions = *repetitions;
    if (samples) c.scheduler.proposal_samples = *samples;
    if (proposal_probability) c.scheduler.proposal_probability = *proposal_probability;
    if (control_fraction) c.scheduler.control_fraction = *control_fraction;
    if (taylor_mode) c.scheduler.taylor_mode = taylor_mode_from_string(*taylor_mode);
    c.env.fixed_delay = tau;
    c.env.xi_mean = xi_mean;
    c.env.xi_sd = xi_sd;
    c.env.users = users;
    c.env.draws_per_step = draws;
    c.env.noise_sd = noise_sd;
    if (sampling) c.env.sampling = sim::sampling_from_string(*sampling);
    c.checkpoint_dir = checkpoint_dir;
    if (checkpoint_every) c.checkpoint_every = *checkpoint_every;
    if (threads) c.threads = *threads;
    c.output_dir = out;
    if (!config_file.empty()) {
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(io::read_file(config_file));
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("cannot parse config file: ") + e.what());
      }
      c = experiment_from_json(doc, c);
      c.variant = variant;
    }
    c.validate();
    return c;
  }
};

void print_summary(const fs::path& dir) { std::cout << io::read_file(dir / "summary.tsv"); }

int run_variants(const CommonFlags& flags, const std::vector<Variant>& variants) {
  std::vector<RunReport> reports;
  for (Variant v : variants) {
    const ExperimentConfig config = flags.build(v);
    std::cerr << "running " << to_string(v) << " over " << config.seeds.size() << " seeds\n";
    reports.push_back(run_experiment(config));
  }
  const fs::path out = flags.out;
  emit_series(reports, out);
  print_summary(out);
  if (reports.size() >= 2 && !reports.front().runs.empty()) {
    const std::string table = comparison_table(compare_variants(reports));
    io::write_file_atomic(out / "comparison.tsv", table);
    std::cout << "\n" << table;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deltatune: delayed-feedback tuning campaigns on a synthetic environment"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  std::string variant_name = "full";
  auto* run = app.add_subcommand("run", "Run one variant over a seed list");
  run_flags.attach(run);
  run->add_option("--variant", variant_name, "full, raw-metric, synchronous or no-proposal");

  CommonFlags ablate_flags;
  std::vector<std::string> ablate_variants = {"full", "raw-metric", "synchronous", "no-proposal"};
  auto* ablate = app.add_subcommand("ablate", "Run several variants on shared seeds and compare");
  ablate_flags.attach(ablate);
  ablate->add_option("--variants", ablate_variants, "Variants; the first is the reference")
      ->delimiter(',');

  std::string compare_dir;
  std::vector<std::string> compare_variants_list;
  double fraction = 0.8;
  auto* compare = app.add_subcommand("compare", "Compare stored trajectories");
  compare->add_option("--dir", compare_dir, "Directory holding trajectories_<variant>.tsv")
      ->required();
  compare->add_option("--variants", compare_variants_list, "Variants; the first is the reference")
      ->delimiter(',')
      ->required();
  compare->add_option("--fraction", fraction, "Threshold as a fraction of reference final gain");

  std::string problem_file;
  auto* check = app.add_subcommand("check-problem", "Validate a tuning-problem JSON file");
  check->add_option("file", problem_file, "Problem file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_variants(run_flags, {variant_from_string(variant_name)});
    if (ablate->parsed()) {
      std::vector<Variant> variants;
      for (const auto& name : ablate_variants) variants.push_back(variant_from_string(name));
      return run_variants(ablate_flags, variants);
    }
    if (compare->parsed()) {
      std::vector<RunReport> reports;
      for (const auto& name : compare_variants_list) {
        const Variant v = variant_from_string(name);
        reports.push_back(
            read_trajectories(fs::path(compare_dir) / ("trajectories_" + name + ".tsv"), v));
      }
      std::cout << comparison_table(compare_variants(reports, fraction));
      return 0;
    }
    if (check->parsed()) {
      const TuningProblem problem = load_problem(problem_file);
      std::cout << problem_to_json(problem).dump(2) << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
