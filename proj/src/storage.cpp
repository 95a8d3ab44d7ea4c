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

#include "deltatune/storage.hpp"

#include "deltatune/errors.hpp"
#include "deltatune/problem_io.hpp"
#include "deltatune/text_io.hpp"

namespace deltatune {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kFormatTag = "deltatune-scheduler-state";
constexpr const char* kMetricsHeader =
    "candidate_id\tmetric\tround\ttest_mean\ttest_var\ttest_size\t"
    "control_mean\tcontrol_var\tcontrol_size";
constexpr const char* kEstimatesHeader =
    "candidate_id\tmetric\tkind\tround\tmean\tvar\tweight";

std::string hyperparams_table(const SchedulerState& state, Eigen::Index dim) {
  std::string out = "candidate_id";
  for (Eigen::Index k = 0; k < dim; ++k) out += "\ttheta_" + std::to_string(k + 1);
  out += "\tcreated_round\n";
  for (const auto& c : state.bucket.candidates) {
    std::vector<std::string> row{std::to_string(c.id().value)};
    for (Eigen::Index k = 0; k < c.dim(); ++k) row.push_back(io::format_double(c.theta()[k]));
    row.push_back(std::to_string(state.bucket.created_round.at(c.id())));
    out += io::tsv_row(row);
  }
  return out;
}

std::string metrics_table(const SchedulerState& state) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const auto& p : state.metric_log) {
    out += io::tsv_row({std::to_string(p.test.candidate.value), p.test.metric,
                        std::to_string(p.test.round), io::format_double(p.test.sample_mean),
                        io::format_double(p.test.sample_var),
                        std::to_string(p.test.group_size),
                        io::format_double(p.control.sample_mean),
                        io::format_double(p.control.sample_var),
                        std::to_string(p.control.group_size)});
  }
  return out;
}

std::string estimates_table(const SchedulerState& state, const TuningProblem& problem) {
  std::string out = std::string(kEstimatesHeader) + "\n";
  for (const auto& c : state.bucket.candidates) {
    for (const auto& m : problem.metrics()) {
      const auto history = state.record.history(c.id(), m.name);
      if (history.empty()) continue;
      const std::string id = std::to_string(c.id().value);
      for (const auto& e : history) {
        out += io::tsv_row({id, m.name, "hourly", std::to_string(e.round),
                            io::format_double(e.hourly.mean), io::format_double(e.hourly.var),
                            std::to_string(e.size)});
      }
      const auto agg = *state.record.aggregate(c.id(), m.name);
      out += io::tsv_row({id, m.name, "aggregate", "-", io::format_double(agg.mean),
                          io::format_double(agg.var), io::format_double(agg.weight)});
    }
  }
  return out;
}

std::vector<std::string> table_rows(const fs::path& path, const std::string& expected_header) {
  if (!fs::exists(path)) throw RestoreError("missing state file " + path.string());
  auto lines = io::read_lines(path);
  if (lines.empty() || (!expected_header.empty() && lines.front() != expected_header)) {
    throw RestoreError("unexpected header in " + path.string());
  }
  lines.erase(lines.begin());
  return lines;
}

}  // namespace

std::string to_string(TaylorMode mode) {
  return mode == TaylorMode::kLiteral ? "literal" : "delta-method";
}

TaylorMode taylor_mode_from_string(const std::string& name) {
  if (name == "literal") return TaylorMode::kLiteral;
  if (name == "delta-method") return TaylorMode::kDeltaMethod;
  throw ConfigError("unknown taylor mode '" + name + "'");
}

json config_to_json(const SchedulerConfig& config) {
  json init;
  switch (config.initial.kind) {
    case InitialBucket::Kind::kExplicit: {
      init["kind"] = "explicit";
      init["points"] = json::array();
      for (const auto& p : config.initial.points) init["points"].push_back(vector_to_json(p));
      break;
    }
    case InitialBucket::Kind::kGrid:
      init["kind"] = "grid";
      init["grid_per_dim"] = config.initial.grid_per_dim;
      break;
    case InitialBucket::Kind::kUniform:
      init["kind"] = "uniform";
      init["count"] = config.initial.count;
      break;
  }
  return json{{"repetitions", config.repetitions},
              {"proposal_samples", config.proposal_samples},
              {"proposal_probability", config.proposal_probability},
              {"control_fraction", config.control_fraction},
              {"taylor_mode", to_string(config.taylor_mode)},
              {"signal", config.signal == SignalMode::kRaw ? "raw" : "delta"},
              {"initial", init}};
}

SchedulerConfig config_from_json(const json& doc) {
  SchedulerConfig c;
  try {
    c.repetitions = doc.value("repetitions", c.repetitions);
    c.proposal_samples = doc.value("proposal_samples", c.proposal_samples);
    c.proposal_probability = doc.value("proposal_probability", c.proposal_probability);
    c.control_fraction = doc.value("control_fraction", c.control_fraction);
    c.taylor_mode = taylor_mode_from_string(doc.value("taylor_mode", to_string(c.taylor_mode)));
    const auto signal = doc.value("signal", std::string("delta"));
    if (signal != "delta" && signal != "raw") throw ConfigError("unknown signal '" + signal + "'");
    c.signal = signal == "raw" ? SignalMode::kRaw : SignalMode::kDelta;
    if (doc.contains("initial")) {
      const auto& init = doc.at("initial");
      const auto kind = init.at("kind").get<std::string>();
      if (kind == "explicit") {
        c.initial.kind = InitialBucket::Kind::kExplicit;
        for (const auto& p : init.at("points")) c.initial.points.push_back(vector_from_json(p));
      } else if (kind == "grid") {
        c.initial.kind = InitialBucket::Kind::kGrid;
        c.initial.grid_per_dim = init.at("grid_per_dim").get<int>();
      } else if (kind == "uniform") {
        c.initial.kind = InitialBucket::Kind::kUniform;
        c.initial.count = init.at("count").get<int>();
      } else {
        throw ConfigError("unknown initial bucket kind '" + kind + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scheduler config: ") + e.what());
  }
  c.validate();
  return c;
}

void persist(const SchedulerState& state, const SchedulerConfig& config,
             const TuningProblem& problem, const fs::path& dir) {
  fs::create_directories(dir);
  json manifest{{"format", kFormatTag},
                {"version", kStateFormatVersion},
                {"round", state.round},
                {"next_id", state.next_id},
                {"exposed", state.exposed},
                {"rng", rng_state(state.rng)},
                {"config", config_to_json(config)},
                {"problem", problem_to_json(problem)}};
  io::write_file_atomic(dir / "hyperparams.tsv",
                        hyperparams_table(state, problem.bounds().dim()));
  io::write_file_atomic(dir / "metrics.tsv", metrics_table(state));
  io::write_file_atomic(dir / "estimates.tsv", estimates_table(state, problem));
  io::write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

StateSnapshot restore(const fs::path& dir, const FunctionRegistry& registry) {
  json manifest;
  const auto manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw RestoreError("missing " + manifest_path.string());
  try {
    manifest = json::parse(io::read_file(manifest_path));
  } catch (const json::exception& e) {
    throw RestoreError("corrupt manifest: " + std::string(e.what()));
  }
  try {
    if (manifest.at("format").get<std::string>() != kFormatTag) {
      throw RestoreError("not a scheduler state directory: " + dir.string());
    }
    if (manifest.at("version").get<int>() != kStateFormatVersion) {
      throw RestoreError("state format version " +
                         std::to_string(manifest.at("version").get<int>()) +
                         " is not supported (expected " +
                         std::to_string(kStateFormatVersion) + ")");
    }
    SchedulerConfig config = config_from_json(manifest.at("config"));
    TuningProblem problem = problem_from_json(manifest.at("problem"), registry);
    const auto dim = problem.bounds().dim();

    SchedulerState state;
    state.round = manifest.at("round").get<std::int64_t>();
    state.next_id = manifest.at("next_id").get<std::uint64_t>();
    state.exposed = manifest.at("exposed").get<bool>();
    state.rng = rng_from_state(manifest.at("rng").get<std::string>());

    std::string hp_header = "candidate_id";
    for (Eigen::Index k = 0; k < dim; ++k) hp_header += "\ttheta_" + std::to_string(k + 1);
    hp_header += "\tcreated_round";
    for (const auto& line : table_rows(dir / "hyperparams.tsv", hp_header)) {
      const auto f = io::split(line);
      if (f.size() != static_cast<std::size_t>(dim) + 2) {
        throw RestoreError("hyperparams.tsv: wrong column count");
      }
      Vector theta(dim);
      for (Eigen::Index k = 0; k < dim; ++k) {
        theta[k] = io::parse_double(f[static_cast<std::size_t>(k) + 1]);
      }
      state.bucket.add(HyperParam(CandidateId{io::parse_uint(f[0])}, theta, problem.bounds()),
                       io::parse_int(f.back()));
    }

    for (const auto& line : table_rows(dir / "metrics.tsv", kMetricsHeader)) {
      const auto f = io::split(line);
      if (f.size() != 9) throw RestoreError("metrics.tsv: wrong column count");
      ReadingPair pair;
      pair.test = {CandidateId{io::parse_uint(f[0])}, std::string(f[1]), io::parse_int(f[2]),
                   io::parse_double(f[3]), io::parse_double(f[4]), io::parse_int(f[5])};
      pair.control = {problem.base().id(), pair.test.metric, pair.test.round,
                      io::parse_double(f[6]), io::parse_double(f[7]), io::parse_int(f[8])};
      if (!state.bucket.contains(pair.test.candidate)) {
        throw RestoreError("metrics.tsv: reading for unknown candidate " +
                           std::to_string(pair.test.candidate.value));
      }
      absorb_pair(state, pair, config);
    }
    for (const auto& c : state.bucket.candidates) {
      if (c.id().value >= state.next_id) throw RestoreError("next_id collides with bucket");
    }
    return StateSnapshot{std::move(state), std::move(config), std::move(problem)};
  } catch (const RestoreError&) {
    throw;
  } catch (const Error& e) {
    throw RestoreError(std::string("state ") + dir.string() + ": " + e.what());
  } catch (const json::exception& e) {
    throw RestoreError(std::string("state ") + dir.string() + ": " + e.what());
  }
}

}  // namespace deltatune
