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

#include "deltatune/sim_env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <tuple>

#include "deltatune/errors.hpp"
#include "deltatune/problem_io.hpp"
#include "deltatune/text_io.hpp"

namespace deltatune::sim {

using nlohmann::json;

double DeltaField::raw(const VectorRef& theta) const {
  double sum = 0.0;
  for (const auto& b : bumps) {
    const double r2 = (theta - b.center).squaredNorm();
    sum += b.amplitude * std::exp(-0.5 * r2 / (b.width * b.width));
  }
  return sum;
}

double DeltaField::operator()(const VectorRef& theta) const {
  const double span = raw_max - raw_min;
  if (span <= 0.0) return 0.0;
  return std::clamp((raw(theta) - raw_min) / span, 0.0, 1.0);
}

double DailyPattern::operator()(std::int64_t t) const {
  const double phase = 2.0 * std::numbers::pi * static_cast<double>(((t % kPeriod) + kPeriod) % kPeriod) /
                       kPeriod;
  double base = 1.0;
  for (int h = 0; h < kHarmonics; ++h) {
    base += amplitudes[static_cast<std::size_t>(h)] *
            std::cos((h + 1) * phase + phases[static_cast<std::size_t>(h)]);
  }
  double value = base;
  if (mirrored) {
    value = 2.0 * mirror_mean - base + extra_amplitude * std::cos(extra_harmonic * phase + extra_phase);
  }
  return std::max(kPatternFloor, value);
}

double DailyPattern::period_mean() const {
  double sum = 0.0;
  for (int t = 0; t < kPeriod; ++t) sum += (*this)(t);
  return sum / kPeriod;
}

double EnvSpec::metric_mean(int k, const VectorRef& theta, std::int64_t t) const {
  const auto i = static_cast<std::size_t>(k);
  return (1.0 + kLift * delta_fields[i](theta)) * patterns[i](t);
}

double EnvSpec::period_mean(int k, const VectorRef& theta) const {
  const auto i = static_cast<std::size_t>(k);
  return (1.0 + kLift * delta_fields[i](theta)) * patterns[i].period_mean();
}

double EnvSpec::objective(const VectorRef& theta) const {
  return weights[0] * period_mean(0, theta) + weights[1] * period_mean(1, theta);
}

double EnvSpec::guardrail(const VectorRef& theta) const {
  return weights[2] * period_mean(0, theta) + weights[3] * period_mean(1, theta);
}

namespace {

DeltaField random_field(Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> width(0.08, 0.3);
  std::uniform_real_distribution<double> amplitude(0.3, 1.0);
  DeltaField field;
  for (int i = 0; i < kBumpsPerField; ++i) {
    RadialBump b;
    b.center = Vector(2);
    b.center[0] = unit(rng);
    b.center[1] = unit(rng);
    b.width = width(rng);
    b.amplitude = amplitude(rng);
    field.bumps.push_back(std::move(b));
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  Vector theta(2);
  for (int i = 0; i < kNormalizationGrid; ++i) {
    for (int j = 0; j < kNormalizationGrid; ++j) {
      theta << static_cast<double>(i) / (kNormalizationGrid - 1),
          static_cast<double>(j) / (kNormalizationGrid - 1);
      const double r = field.raw(theta);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
  }
  field.raw_min = lo;
  field.raw_max = hi;
  return field;
}

}  // namespace

EnvSpec build_env(std::uint64_t seed) {
  EnvSpec env;
  env.seed = seed;
  Rng rng(derive_seed(seed, "landscape"));
  env.delta_fields[0] = random_field(rng);
  env.delta_fields[1] = random_field(rng);

  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> main_amp(0.25, 0.45);
  std::uniform_real_distribution<double> minor_amp(0.0, 0.1);
  DailyPattern w1;
  w1.amplitudes = {main_amp(rng), minor_amp(rng), minor_amp(rng)};
  w1.phases = {phase(rng), phase(rng), phase(rng)};

  DailyPattern w2 = w1;
  w2.mirrored = true;
  w2.mirror_mean = w1.period_mean();
  w2.extra_harmonic = std::uniform_int_distribution<int>(1, kHarmonics)(rng);
  w2.extra_amplitude = std::uniform_real_distribution<double>(0.0, 0.05)(rng);
  w2.extra_phase = phase(rng);
  env.patterns = {w1, w2};
  return env;
}

GainViolation true_gain_violation(const EnvSpec& env, const VectorRef& theta) {
  return {gain(env.objective(theta), env.objective(env.base)),
          violation(env.guardrail(theta), env.threshold)};
}

const std::vector<MetricId>& metric_ids() {
  static const std::vector<MetricId> ids{{"x1"}, {"x2"}};
  return ids;
}

TuningProblem synthetic_problem(const EnvSpec& env, SignalMode signal) {
  const Bounds bounds = Bounds::unit(2);
  HyperParam base(CandidateId{0}, env.base, bounds);
  const auto& w = env.weights;
  if (signal == SignalMode::kRaw) {
    return TuningProblem(metric_ids(), FunctionExpr::linear(Vector{{w[0], w[1]}}),
                         {ConstraintSpec{FunctionExpr::linear(Vector{{w[2], w[3]}}),
                                         env.threshold, Direction::kAtLeast}},
                         base);
  }
  // f(theta) = f(theta_0) + sum_k w_k m_k(theta_0) delta_k, likewise for g.
  const double m1 = env.period_mean(0, env.base);
  const double m2 = env.period_mean(1, env.base);
  const double f0 = env.objective(env.base);
  const double g0 = env.guardrail(env.base);
  return TuningProblem(
      metric_ids(), FunctionExpr::linear(Vector{{w[0] * m1 / f0, w[1] * m2 / f0}}),
      {ConstraintSpec{FunctionExpr::linear(Vector{{w[2] * m1, w[3] * m2}}), env.threshold - g0,
                      Direction::kAtLeast}},
      base);
}

namespace {

struct SampleStats {
  double mean;
  double var;
  std::int64_t size;
};

std::int64_t group_size(const EnvSpec& env, double fraction) {
  const auto n = static_cast<std::int64_t>(std::llround(fraction * static_cast<double>(env.users)));
  return std::max<std::int64_t>(1, n);
}

SampleStats draw_group(const EnvSpec& env, double mu, double fraction, Rng& rng) {
  const std::int64_t nominal = group_size(env, fraction);
  if (env.sampling == Sampling::kPopulation) {
    const double n = static_cast<double>(nominal);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double mean = mu + env.noise_sd / std::sqrt(n) * normal(rng);
    double var = 0.0;
    if (nominal > 1) {
      std::gamma_distribution<double> chi2_half((n - 1.0) / 2.0, 2.0);
      var = env.noise_sd * env.noise_sd * chi2_half(rng) / (n - 1.0);
    }
    return {mean, var, nominal};
  }
  std::normal_distribution<double> normal(mu, env.noise_sd);
  const int n = std::max(2, env.draws_per_step);
  double mean = 0.0;
  double m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = normal(rng);
    const double d = x - mean;
    mean += d / (i + 1);
    m2 += d * (x - mean);
  }
  const std::int64_t size = env.sampling == Sampling::kDraws ? n : nominal;
  return {mean, m2 / (n - 1), size};
}

}  // namespace

std::vector<InboundBatch> step(const EnvSpec& env, const RoundPlan& plan,
                               const BucketState& bucket, std::int64_t t, Rng& rng) {
  if (std::abs(plan.total() - 1.0) > 1e-9) {
    throw InvalidInputError("sim step: plan fractions do not sum to one");
  }
  const auto& names = metric_ids();
  std::array<SampleStats, 2> control{};
  for (int k = 0; k < 2; ++k) {
    control[static_cast<std::size_t>(k)] =
        draw_group(env, env.metric_mean(k, env.base, t), plan.control_fraction, rng);
  }
  std::normal_distribution<double> xi(env.xi_mean, env.xi_sd);
  std::vector<InboundBatch> out;
  for (const auto& [id, fraction] : plan.assignments) {
    if (!(fraction > 0.0)) continue;
    const HyperParam& candidate = bucket.at(id);
    InboundBatch batch;
    batch.origin_round = t;
    for (int k = 0; k < 2; ++k) {
      const auto i = static_cast<std::size_t>(k);
      const auto s = draw_group(env, env.metric_mean(k, candidate.theta(), t), fraction, rng);
      const auto& c = control[i];
      batch.readings.push_back({GroupReading{id, names[i].name, t, s.mean, s.var, s.size},
                                GroupReading{CandidateId{0}, names[i].name, t, c.mean, c.var,
                                             c.size}});
    }
    const double lag = env.xi_sd > 0.0 ? std::abs(xi(rng)) : std::abs(env.xi_mean);
    batch.arrival_round = t + env.fixed_delay + static_cast<std::int64_t>(std::llround(lag));
    out.push_back(std::move(batch));
  }
  return out;
}

void DeliveryQueue::push(std::vector<InboundBatch> batches) {
  for (auto& b : batches) {
    if (b.arrival_round < b.origin_round) {
      throw InvalidInputError("delivery: batch arrives before its origin round");
    }
    pending_.push_back(std::move(b));
  }
}

std::vector<InboundBatch> DeliveryQueue::release(std::int64_t round) {
  std::vector<InboundBatch> ready;
  std::vector<InboundBatch> keep;
  for (auto& b : pending_) {
    (b.arrival_round <= round ? ready : keep).push_back(std::move(b));
  }
  pending_ = std::move(keep);
  auto key = [](const InboundBatch& b) {
    const std::uint64_t cand = b.readings.empty() ? 0 : b.readings.front().test.candidate.value;
    return std::make_tuple(b.arrival_round, b.origin_round, cand);
  };
  std::stable_sort(ready.begin(), ready.end(),
                   [&](const InboundBatch& a, const InboundBatch& b) { return key(a) < key(b); });
  return ready;
}

std::string to_string(Sampling s) {
  switch (s) {
    case Sampling::kDraws: return "draws";
    case Sampling::kPopulation: return "population";
    case Sampling::kDrawsNominalSize: return "draws-nominal-size";
  }
  return "draws";
}

Sampling sampling_from_string(const std::string& name) {
  if (name == "draws") return Sampling::kDraws;
  if (name == "population") return Sampling::kPopulation;
  if (name == "draws-nominal-size") return Sampling::kDrawsNominalSize;
  throw ConfigError("unknown sampling '" + name + "'");
}

namespace {

json field_to_json(const DeltaField& f) {
  json bumps = json::array();
  for (const auto& b : f.bumps) {
    bumps.push_back({{"center", vector_to_json(b.center)},
                     {"width", b.width},
                     {"amplitude", b.amplitude}});
  }
  return {{"bumps", bumps}, {"raw_min", f.raw_min}, {"raw_max", f.raw_max}};
}

DeltaField field_from_json(const json& j) {
  DeltaField f;
  for (const auto& b : j.at("bumps")) {
    f.bumps.push_back({vector_from_json(b.at("center")), b.at("width").get<double>(),
                       b.at("amplitude").get<double>()});
  }
  f.raw_min = j.at("raw_min").get<double>();
  f.raw_max = j.at("raw_max").get<double>();
  return f;
}

json pattern_to_json(const DailyPattern& p) {
  return {{"amplitudes", p.amplitudes},           {"phases", p.phases},
          {"mirrored", p.mirrored},               {"mirror_mean", p.mirror_mean},
          {"extra_harmonic", p.extra_harmonic},   {"extra_amplitude", p.extra_amplitude},
          {"extra_phase", p.extra_phase}};
}

DailyPattern pattern_from_json(const json& j) {
  DailyPattern p;
  p.amplitudes = j.at("amplitudes").get<std::array<double, kHarmonics>>();
  p.phases = j.at("phases").get<std::array<double, kHarmonics>>();
  p.mirrored = j.at("mirrored").get<bool>();
  p.mirror_mean = j.at("mirror_mean").get<double>();
  p.extra_harmonic = j.at("extra_harmonic").get<int>();
  p.extra_amplitude = j.at("extra_amplitude").get<double>();
  p.extra_phase = j.at("extra_phase").get<double>();
  return p;
}

}  // namespace

json env_to_json(const EnvSpec& env) {
  return {{"seed", env.seed},
          {"delta_fields", {field_to_json(env.delta_fields[0]), field_to_json(env.delta_fields[1])}},
          {"patterns", {pattern_to_json(env.patterns[0]), pattern_to_json(env.patterns[1])}},
          {"noise_sd", env.noise_sd},
          {"weights", env.weights},
          {"threshold", env.threshold},
          {"fixed_delay", env.fixed_delay},
          {"xi_mean", env.xi_mean},
          {"xi_sd", env.xi_sd},
          {"users", env.users},
          {"draws_per_step", env.draws_per_step},
          {"sampling", to_string(env.sampling)},
          {"base", vector_to_json(env.base)}};
}

EnvSpec env_from_json(const json& doc) {
  try {
    EnvSpec env;
    env.seed = doc.at("seed").get<std::uint64_t>();
    env.delta_fields = {field_from_json(doc.at("delta_fields").at(0)),
                        field_from_json(doc.at("delta_fields").at(1))};
    env.patterns = {pattern_from_json(doc.at("patterns").at(0)),
                    pattern_from_json(doc.at("patterns").at(1))};
    env.noise_sd = doc.at("noise_sd").get<double>();
    env.weights = doc.at("weights").get<std::array<double, 4>>();
    env.threshold = doc.at("threshold").get<double>();
    env.fixed_delay = doc.at("fixed_delay").get<std::int64_t>();
    env.xi_mean = doc.at("xi_mean").get<double>();
    env.xi_sd = doc.at("xi_sd").get<double>();
    env.users = doc.at("users").get<std::int64_t>();
    env.draws_per_step = doc.at("draws_per_step").get<int>();
    env.sampling = sampling_from_string(doc.at("sampling").get<std::string>());
    env.base = vector_from_json(doc.at("base"));
    return env;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("environment snapshot: ") + e.what());
  }
}

void save_env(const EnvSpec& env, const std::filesystem::path& path) {
  io::write_file_atomic(path, env_to_json(env).dump(2) + "\n");
}

EnvSpec load_env(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return env_from_json(doc);
}

}  // namespace deltatune::sim
