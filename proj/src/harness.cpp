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

#include "deltatune/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "deltatune/errors.hpp"
#include "deltatune/storage.hpp"
#include "deltatune/text_io.hpp"

namespace deltatune::harness {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kRunnerFormat = "deltatune-seed-runner";
constexpr int kRunnerVersion = 1;

json reading_to_json(const GroupReading& r) {
  return {{"candidate", r.candidate.value}, {"metric", r.metric},
          {"round", r.round},               {"mean", r.sample_mean},
          {"var", r.sample_var},            {"n", r.group_size}};
}

GroupReading reading_from_json(const json& j) {
  GroupReading r;
  r.candidate = CandidateId{j.at("candidate").get<std::uint64_t>()};
  r.metric = j.at("metric").get<std::string>();
  r.round = j.at("round").get<std::int64_t>();
  r.sample_mean = j.at("mean").get<double>();
  r.sample_var = j.at("var").get<double>();
  r.group_size = j.at("n").get<std::int64_t>();
  return r;
}

json batch_to_json(const InboundBatch& b) {
  json readings = json::array();
  for (const auto& p : b.readings) {
    readings.push_back({{"test", reading_to_json(p.test)},
                        {"control", reading_to_json(p.control)}});
  }
  return {{"origin", b.origin_round}, {"arrival", b.arrival_round}, {"readings", readings}};
}

InboundBatch batch_from_json(const json& j) {
  InboundBatch b;
  b.origin_round = j.at("origin").get<std::int64_t>();
  b.arrival_round = j.at("arrival").get<std::int64_t>();
  for (const auto& p : j.at("readings")) {
    b.readings.push_back({reading_from_json(p.at("test")), reading_from_json(p.at("control"))});
  }
  return b;
}

fs::path seed_dir(const fs::path& root, Variant v, std::uint64_t seed) {
  return root / to_string(v) / ("seed_" + std::to_string(seed));
}

sim::EnvSpec campaign_env(const ExperimentConfig& config, std::uint64_t seed) {
  sim::EnvSpec env = sim::build_env(seed);
  config.env.apply(env);
  return env;
}

std::string fmt(double v) { return io::format_double(v); }

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kRawMetric: return "raw-metric";
    case Variant::kSynchronous: return "synchronous";
    case Variant::kNoProposal: return "no-proposal";
  }
  return "full";
}

Variant variant_from_string(const std::string& name) {
  if (name == "full") return Variant::kFull;
  if (name == "raw-metric") return Variant::kRawMetric;
  if (name == "synchronous") return Variant::kSynchronous;
  if (name == "no-proposal") return Variant::kNoProposal;
  throw ConfigError("unknown variant '" + name + "'");
}

const std::vector<std::uint64_t>& reference_seeds() {
  static const std::vector<std::uint64_t> seeds = {
      42,  40,  22,  35,  0,   1,   130, 3,   131, 5,   24,  120, 27,  2,   73,  52,  66,
      69,  23,  100, 53,  36,  21,  4,   59,  64,  14,  99,  43,  97,  62,  113, 65,  68,
      84,  28,  96,  45,  95,  30,  70,  17,  50,  25,  49,  37,  112, 125, 44,  127};
  return seeds;
}

const std::vector<std::uint64_t>& default_seeds() {
  static const std::vector<std::uint64_t> seeds(reference_seeds().begin(),
                                                reference_seeds().begin() + 10);
  return seeds;
}

void EnvOverrides::apply(sim::EnvSpec& env) const {
  if (fixed_delay) env.fixed_delay = *fixed_delay;
  if (xi_mean) env.xi_mean = *xi_mean;
  if (xi_sd) env.xi_sd = *xi_sd;
  if (users) env.users = *users;
  if (draws_per_step) env.draws_per_step = *draws_per_step;
  if (noise_sd) env.noise_sd = *noise_sd;
  if (sampling) env.sampling = *sampling;
}

SchedulerConfig ExperimentConfig::effective_scheduler() const {
  SchedulerConfig c = scheduler;
  if (variant == Variant::kRawMetric) c.signal = SignalMode::kRaw;
  if (variant == Variant::kNoProposal) c.proposal_probability = 0.0;
  return c;
}

void ExperimentConfig::validate() const {
  if (rounds < 0) throw ConfigError("rounds must be non-negative");
  if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be at least 1");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
  if (unique.size() != seeds.size()) throw ConfigError("duplicate seed");
  if (env.fixed_delay && *env.fixed_delay < 0) throw ConfigError("fixed delay must be >= 0");
  if (env.xi_sd && !(*env.xi_sd >= 0.0)) throw ConfigError("xi sd must be >= 0");
  if (env.xi_mean && !std::isfinite(*env.xi_mean)) throw ConfigError("xi mean must be finite");
  if (env.users && *env.users < 1) throw ConfigError("users must be positive");
  if (env.draws_per_step && *env.draws_per_step < 2) {
    throw ConfigError("draws per step must be at least 2");
  }
  if (env.noise_sd && !(*env.noise_sd > 0.0)) throw ConfigError("noise sd must be positive");
  try {
    effective_scheduler().validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

json experiment_to_json(const ExperimentConfig& c) {
  json env = json::object();
  if (c.env.fixed_delay) env["fixed_delay"] = *c.env.fixed_delay;
  if (c.env.xi_mean) env["xi_mean"] = *c.env.xi_mean;
  if (c.env.xi_sd) env["xi_sd"] = *c.env.xi_sd;
  if (c.env.users) env["users"] = *c.env.users;
  if (c.env.draws_per_step) env["draws_per_step"] = *c.env.draws_per_step;
  if (c.env.noise_sd) env["noise_sd"] = *c.env.noise_sd;
  if (c.env.sampling) env["sampling"] = sim::to_string(*c.env.sampling);
  return {{"variant", to_string(c.variant)},
          {"seeds", c.seeds},
          {"rounds", c.rounds},
          {"scheduler", config_to_json(c.scheduler)},
          {"env", env},
          {"output_dir", c.output_dir.string()},
          {"checkpoint_dir", c.checkpoint_dir.string()},
          {"checkpoint_every", c.checkpoint_every},
          {"threads", c.threads}};
}

ExperimentConfig experiment_from_json(const json& doc, ExperimentConfig c) {
  static const std::set<std::string> known = {"variant",        "seeds",          "rounds",
                                              "scheduler",      "env",            "output_dir",
                                              "checkpoint_dir", "checkpoint_every", "threads"};
  static const std::set<std::string> env_keys = {"fixed_delay", "xi_mean",        "xi_sd",
                                                 "users",       "draws_per_step", "noise_sd",
                                                 "sampling"};
  if (!doc.is_object()) throw ConfigError("experiment config must be a JSON object");
  try {
    for (const auto& [key, _] : doc.items()) {
      if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
    }
    if (doc.contains("variant")) c.variant = variant_from_string(doc["variant"].get<std::string>());
    if (doc.contains("seeds")) c.seeds = doc["seeds"].get<std::vector<std::uint64_t>>();
    if (doc.contains("rounds")) c.rounds = doc["rounds"].get<int>();
    if (doc.contains("scheduler")) {
      json merged = config_to_json(c.scheduler);
      merged.merge_patch(doc["scheduler"]);
      c.scheduler = config_from_json(merged);
    }
    if (doc.contains("env")) {
      const json& e = doc["env"];
      if (!e.is_object()) throw ConfigError("'env' must be an object");
      for (const auto& [key, _] : e.items()) {
        if (!env_keys.count(key)) throw ConfigError("unknown env key '" + key + "'");
      }
      if (e.contains("fixed_delay")) c.env.fixed_delay = e["fixed_delay"].get<std::int64_t>();
      if (e.contains("xi_mean")) c.env.xi_mean = e["xi_mean"].get<double>();
      if (e.contains("xi_sd")) c.env.xi_sd = e["xi_sd"].get<double>();
      if (e.contains("users")) c.env.users = e["users"].get<std::int64_t>();
      if (e.contains("draws_per_step")) c.env.draws_per_step = e["draws_per_step"].get<int>();
      if (e.contains("noise_sd")) c.env.noise_sd = e["noise_sd"].get<double>();
      if (e.contains("sampling")) {
        c.env.sampling = sim::sampling_from_string(e["sampling"].get<std::string>());
      }
    }
    if (doc.contains("output_dir")) c.output_dir = doc["output_dir"].get<std::string>();
    if (doc.contains("checkpoint_dir")) c.checkpoint_dir = doc["checkpoint_dir"].get<std::string>();
    if (doc.contains("checkpoint_every")) c.checkpoint_every = doc["checkpoint_every"].get<int>();
    if (doc.contains("threads")) c.threads = doc["threads"].get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

MeanSe mean_se(const std::vector<double>& values) {
  MeanSe out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / n;
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.se = std::sqrt(ss / (n - 1.0) / n);
  return out;
}

std::vector<std::uint64_t> RunReport::seeds() const {
  std::vector<std::uint64_t> out;
  for (const auto& r : runs) out.push_back(r.seed);
  return out;
}

MeanSe RunReport::gain_at(int round) const {
  std::vector<double> v;
  for (const auto& r : runs) v.push_back(r.rounds.at(static_cast<std::size_t>(round)).gain);
  return mean_se(v);
}

MeanSe RunReport::violation_at(int round) const {
  std::vector<double> v;
  for (const auto& r : runs) v.push_back(r.rounds.at(static_cast<std::size_t>(round)).violation);
  return mean_se(v);
}

MeanSe RunReport::final_gain() const {
  std::vector<double> v;
  for (const auto& r : runs) v.push_back(r.final_gain);
  return mean_se(v);
}

MeanSe RunReport::final_violation() const {
  std::vector<double> v;
  for (const auto& r : runs) v.push_back(r.final_violation);
  return mean_se(v);
}

SeedRunner::SeedRunner(const ExperimentConfig& config, std::uint64_t seed)
    : config_(config),
      scheduler_(config.effective_scheduler()),
      seed_(seed),
      env_(campaign_env(config, seed)),
      problem_(sim::synthetic_problem(env_, scheduler_.signal)) {
  auto [state, plan] = bootstrap(scheduler_, problem_, derive_seed(seed, "tuner"));
  state_ = std::move(state);
  env_rng_ = Rng(derive_seed(seed, "measurement"));
  if (config_.rounds > 0) {
    dispatch(plan);
    record(current_);
    wall_round_ = 1;
  }
}

SeedRunner::SeedRunner(const ExperimentConfig& config, std::uint64_t seed, sim::EnvSpec env,
                       StateSnapshot snapshot)
    : config_(config),
      scheduler_(std::move(snapshot.config)),
      seed_(seed),
      env_(std::move(env)),
      problem_(std::move(snapshot.problem)),
      state_(std::move(snapshot.state)) {}

void SeedRunner::dispatch(const RoundPlan& plan) {
  queue_.push(sim::step(env_, plan, state_.bucket, wall_round_, env_rng_));
}

void SeedRunner::record(CandidateId winner) {
  RoundRecord r;
  r.round = wall_round_;
  r.winner = winner;
  r.theta = winner.value == 0 ? env_.base : state_.bucket.at(winner).theta();
  const auto gv = sim::true_gain_violation(env_, r.theta);
  r.gain = gv.gain;
  r.violation = gv.violation;
  records_.push_back(std::move(r));
}

void SeedRunner::advance() {
  if (done()) return;
  auto ready = queue_.release(wall_round_);
  arrived_.insert(arrived_.end(), std::make_move_iterator(ready.begin()),
                  std::make_move_iterator(ready.end()));
  if (config_.synchronous() && !queue_.empty()) {
    record(current_);
    ++wall_round_;
    return;
  }
  state_.round = wall_round_;
  const RoundOutcome outcome = run_round(state_, arrived_, problem_, scheduler_);
  arrived_.clear();
  if (outcome.selection) {
    const auto picks = outcome.selection->picks();
    current_ = modal_pick(picks);
  }
  dispatch(outcome.plan);
  record(current_);
  ++wall_round_;
}

void SeedRunner::run_to_end() {
  while (!done()) advance();
}

SeedRun SeedRunner::result() const {
  SeedRun out;
  out.seed = seed_;
  out.rounds = records_;
  if (records_.empty()) {
    const auto gv = sim::true_gain_violation(env_, env_.base);
    out.final_gain = gv.gain;
    out.final_violation = gv.violation;
  } else {
    out.final_gain = records_.back().gain;
    out.final_violation = records_.back().violation;
  }
  return out;
}

void SeedRunner::save(const fs::path& dir) const {
  fs::create_directories(dir);
  persist(state_, scheduler_, problem_, dir / "scheduler");
  sim::save_env(env_, dir / "env.json");
  json queue = json::array();
  for (const auto& b : queue_.pending()) queue.push_back(batch_to_json(b));
  json arrived = json::array();
  for (const auto& b : arrived_) arrived.push_back(batch_to_json(b));
  json records = json::array();
  for (const auto& r : records_) {
    records.push_back({{"round", r.round}, {"winner", r.winner.value}});
  }
  const json doc = {{"format", kRunnerFormat},
                    {"version", kRunnerVersion},
                    {"variant", to_string(config_.variant)},
                    {"seed", seed_},
                    {"wall_round", wall_round_},
                    {"current", current_.value},
                    {"env_rng", rng_state(env_rng_)},
                    {"queue", queue},
                    {"arrived", arrived},
                    {"records", records}};
  io::write_file_atomic(dir / "runner.json", doc.dump(1) + "\n");
}

SeedRunner SeedRunner::load(const fs::path& dir, const ExperimentConfig& config) {
  json doc;
  try {
    doc = json::parse(io::read_file(dir / "runner.json"));
  } catch (const json::exception& e) {
    throw RestoreError(std::string("corrupt runner checkpoint: ") + e.what());
  } catch (const IoError& e) {
    throw RestoreError(e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != kRunnerFormat ||
        doc.at("version").get<int>() != kRunnerVersion) {
      throw RestoreError("unsupported runner checkpoint format");
    }
    if (doc.at("variant").get<std::string>() != to_string(config.variant)) {
      throw RestoreError("checkpoint belongs to a different variant");
    }
    const auto seed = doc.at("seed").get<std::uint64_t>();
    sim::EnvSpec env;
    try {
      env = sim::load_env(dir / "env.json");
    } catch (const Error& e) {
      throw RestoreError(e.what());
    }
    SeedRunner runner(config, seed, std::move(env), restore(dir / "scheduler"));
    runner.wall_round_ = doc.at("wall_round").get<std::int64_t>();
    runner.current_ = CandidateId{doc.at("current").get<std::uint64_t>()};
    runner.env_rng_ = rng_from_state(doc.at("env_rng").get<std::string>());
    std::vector<InboundBatch> pending;
    for (const auto& b : doc.at("queue")) pending.push_back(batch_from_json(b));
    runner.queue_.push(std::move(pending));
    for (const auto& b : doc.at("arrived")) runner.arrived_.push_back(batch_from_json(b));
    for (const auto& r : doc.at("records")) {
      RoundRecord rec;
      rec.round = r.at("round").get<std::int64_t>();
      rec.winner = CandidateId{r.at("winner").get<std::uint64_t>()};
      rec.theta = rec.winner.value == 0 ? runner.env_.base
                                        : runner.state_.bucket.at(rec.winner).theta();
      const auto gv = sim::true_gain_violation(runner.env_, rec.theta);
      rec.gain = gv.gain;
      rec.violation = gv.violation;
      runner.records_.push_back(std::move(rec));
    }
    if (static_cast<std::int64_t>(runner.records_.size()) != runner.wall_round_) {
      throw RestoreError("runner checkpoint trajectory length mismatch");
    }
    return runner;
  } catch (const RestoreError&) {
    throw;
  } catch (const std::exception& e) {
    throw RestoreError(std::string("corrupt runner checkpoint: ") + e.what());
  }
}

RunReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  RunReport report;
  report.variant = config.variant;
  report.rounds = config.rounds;
  report.runs.resize(config.seeds.size());

  const bool outputs = !config.output_dir.empty();
  if (outputs) {
    fs::create_directories(config.output_dir / "envs");
    fs::create_directories(config.output_dir / "states" / to_string(config.variant));
  }

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= config.seeds.size()) return;
      try {
        const std::uint64_t seed = config.seeds[i];
        const bool checkpointing = !config.checkpoint_dir.empty();
        const fs::path ckpt = checkpointing ? seed_dir(config.checkpoint_dir, config.variant, seed)
                                            : fs::path{};
        SeedRunner runner = checkpointing && fs::exists(ckpt / "runner.json")
                                ? SeedRunner::load(ckpt, config)
                                : SeedRunner(config, seed);
        while (!runner.done()) {
          runner.advance();
          if (checkpointing && (runner.wall_round() % config.checkpoint_every == 0 ||
                                runner.done())) {
            runner.save(ckpt);
          }
        }
        if (checkpointing && config.rounds == 0) runner.save(ckpt);
        if (outputs) {
          sim::save_env(runner.env(),
                        config.output_dir / "envs" / ("env_" + std::to_string(seed) + ".json"));
          persist(runner.state(), runner.scheduler_config(), runner.problem(),
                  seed_dir(config.output_dir / "states", config.variant, seed));
        }
        report.runs[i] = runner.result();
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(config.seeds.size());
      }
    }
  };
  const int n_threads =
      std::max(1, std::min<int>(config.threads, static_cast<int>(config.seeds.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  if (outputs) {
    write_trajectories(report,
                       config.output_dir / ("trajectories_" + to_string(config.variant) + ".tsv"));
  }
  return report;
}

void write_trajectories(const RunReport& report, const fs::path& path) {
  Eigen::Index dim = 0;
  for (const auto& run : report.runs) {
    if (!run.rounds.empty()) dim = run.rounds.front().theta.size();
  }
  std::vector<std::string> header = {"seed", "round", "winner_id"};
  for (Eigen::Index d = 0; d < dim; ++d) header.push_back("theta_" + std::to_string(d + 1));
  header.push_back("gain");
  header.push_back("violation");
  std::string out = io::tsv_row(header);
  for (const auto& run : report.runs) {
    for (const auto& r : run.rounds) {
      std::vector<std::string> row = {std::to_string(run.seed), std::to_string(r.round),
                                      std::to_string(r.winner.value)};
      for (Eigen::Index d = 0; d < r.theta.size(); ++d) row.push_back(fmt(r.theta[d]));
      row.push_back(fmt(r.gain));
      row.push_back(fmt(r.violation));
      out += io::tsv_row(row);
    }
  }
  io::write_file_atomic(path, out);
}

RunReport read_trajectories(const fs::path& path, Variant variant) {
  const auto lines = io::read_lines(path);
  if (lines.empty()) throw InvalidInputError("empty trajectory file " + path.string());
  const auto header = io::split(lines.front());
  if (header.size() < 5 || header[0] != "seed" || header[1] != "round" ||
      header[2] != "winner_id" || header[header.size() - 2] != "gain" ||
      header.back() != "violation") {
    throw InvalidInputError("unexpected trajectory header in " + path.string());
  }
  const std::size_t dim = header.size() - 5;
  RunReport report;
  report.variant = variant;
  std::map<std::uint64_t, std::size_t> index;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = io::split(lines[i]);
    if (f.size() != header.size()) {
      throw InvalidInputError("malformed trajectory row " + std::to_string(i + 1));
    }
    const auto seed = io::parse_uint(f[0]);
    auto it = index.find(seed);
    if (it == index.end()) {
      it = index.emplace(seed, report.runs.size()).first;
      report.runs.push_back(SeedRun{seed, {}, 0.0, 0.0});
    }
    SeedRun& run = report.runs[it->second];
    RoundRecord r;
    r.round = io::parse_int(f[1]);
    if (r.round != static_cast<std::int64_t>(run.rounds.size())) {
      throw InvalidInputError("non-consecutive rounds for seed " + std::to_string(seed));
    }
    r.winner = CandidateId{io::parse_uint(f[2])};
    r.theta.resize(static_cast<Eigen::Index>(dim));
    for (std::size_t d = 0; d < dim; ++d) {
      r.theta[static_cast<Eigen::Index>(d)] = io::parse_double(f[3 + d]);
    }
    r.gain = io::parse_double(f[3 + dim]);
    r.violation = io::parse_double(f[4 + dim]);
    run.rounds.push_back(std::move(r));
  }
  for (auto& run : report.runs) {
    if (report.runs.front().rounds.size() != run.rounds.size()) {
      throw InvalidInputError("seeds have different trajectory lengths");
    }
    run.final_gain = run.rounds.back().gain;
    run.final_violation = run.rounds.back().violation;
  }
  report.rounds = report.runs.empty() ? 0 : static_cast<int>(report.runs.front().rounds.size());
  return report;
}

std::vector<ComparisonRow> compare_variants(const std::vector<RunReport>& reports,
                                            double fraction) {
  if (reports.size() < 2) throw InvalidInputError("comparison needs at least two reports");
  const RunReport& ref = reports.front();
  if (ref.runs.empty()) throw InvalidInputError("reference report has no seeds");
  for (const auto& r : reports) {
    if (r.seeds() != ref.seeds()) throw InvalidInputError("reports use different seed lists");
    if (r.rounds != ref.rounds) throw InvalidInputError("reports have different round counts");
  }
  const double threshold = fraction * ref.final_gain().mean;
  auto reach = [&](const RunReport& r) -> std::optional<int> {
    for (int t = 0; t < r.rounds; ++t) {
      if (r.gain_at(t).mean >= threshold) return t;
    }
    return std::nullopt;
  };
  const auto ref_reach = reach(ref);
  const double ref_gain = ref.final_gain().mean;
  const double ref_violation = ref.final_violation().mean;
  const double inf = std::numeric_limits<double>::infinity();

  std::vector<ComparisonRow> rows;
  for (const auto& r : reports) {
    ComparisonRow row;
    row.variant = r.variant;
    row.rounds_to_threshold = reach(r);
    if (!ref_reach) {
      row.rounds_ratio = std::numeric_limits<double>::quiet_NaN();
    } else if (!row.rounds_to_threshold) {
      row.rounds_ratio = inf;
    } else if (*ref_reach == 0) {
      row.rounds_ratio = *row.rounds_to_threshold == 0 ? 1.0 : inf;
    } else {
      row.rounds_ratio = static_cast<double>(*row.rounds_to_threshold) / *ref_reach;
    }
    row.final_gain = r.final_gain().mean;
    row.final_gain_delta = row.final_gain - ref_gain;
    row.final_violation_delta = r.final_violation().mean - ref_violation;
    for (std::size_t i = 0; i < r.runs.size(); ++i) {
      if (ref.runs[i].final_gain > r.runs[i].final_gain) ++row.reference_better;
    }
    row.seeds = static_cast<int>(r.runs.size());
    rows.push_back(row);
  }
  return rows;
}

std::string comparison_table(const std::vector<ComparisonRow>& rows) {
  std::string out = io::tsv_row({"variant", "rounds_to_threshold", "rounds_ratio", "final_gain",
                                 "final_gain_delta", "final_violation_delta",
                                 "reference_better", "seeds"});
  for (const auto& r : rows) {
    out += io::tsv_row({to_string(r.variant),
                        r.rounds_to_threshold ? std::to_string(*r.rounds_to_threshold) : "never",
                        fmt(r.rounds_ratio), fmt(r.final_gain), fmt(r.final_gain_delta),
                        fmt(r.final_violation_delta), std::to_string(r.reference_better),
                        std::to_string(r.seeds)});
  }
  return out;
}

void emit_series(const std::vector<RunReport>& reports, const fs::path& dir) {
  fs::create_directories(dir);
  std::string summary = io::tsv_row({"variant", "seeds", "rounds", "gain_pct", "gain_se_pct",
                                     "violation", "violation_se"});
  for (const auto& report : reports) {
    std::string series =
        io::tsv_row({"round", "mean_gain", "se_gain", "mean_violation", "se_violation"});
    if (!report.runs.empty()) {
      for (int t = 0; t < report.rounds; ++t) {
        const auto g = report.gain_at(t);
        const auto v = report.violation_at(t);
        series += io::tsv_row({std::to_string(t), fmt(g.mean), fmt(g.se), fmt(v.mean), fmt(v.se)});
      }
      const auto g = report.final_gain();
      const auto v = report.final_violation();
      summary += io::tsv_row({to_string(report.variant), std::to_string(report.runs.size()),
                              std::to_string(report.rounds), fmt(100.0 * g.mean),
                              fmt(100.0 * g.se), fmt(v.mean), fmt(v.se)});
    }
    io::write_file_atomic(dir / ("series_" + to_string(report.variant) + ".tsv"), series);
  }
  io::write_file_atomic(dir / "summary.tsv", summary);
}

}  // namespace deltatune::harness
