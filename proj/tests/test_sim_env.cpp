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

#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "deltatune/errors.hpp"
#include "deltatune/sim_env.hpp"

namespace deltatune::sim {
namespace {

namespace fs = std::filesystem;

Vector vec(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

BucketState one_candidate(const Vector& theta) {
  BucketState b;
  b.add(HyperParam(CandidateId{1}, theta, Bounds::unit(2)), 0);
  return b;
}

RoundPlan single_plan(double fraction, double control) {
  RoundPlan p;
  p.assignments = {{CandidateId{1}, fraction}};
  p.control_fraction = control;
  return p;
}

TEST(BuildEnvTest, DefaultConstants) {
  const auto env = build_env(42);
  EXPECT_EQ(env.noise_sd, 0.6);
  EXPECT_EQ(env.users, 1'000'000);
  EXPECT_EQ(env.draws_per_step, 50);
  EXPECT_EQ(env.weights, (std::array<double, 4>{0.296, 1.165, 0.149, 0.703}));
  EXPECT_EQ(env.threshold, 0.6036);
  EXPECT_EQ(env.fixed_delay, 3);
  EXPECT_EQ(env.xi_mean, 0.0);
  EXPECT_EQ(env.xi_sd, 1.0);
  EXPECT_EQ(env.base, vec(0.011, 0.985));
}

TEST(BuildEnvTest, DeltaFieldsSpanUnitInterval) {
  for (std::uint64_t seed : {0, 1, 42, 131}) {
    const auto env = build_env(seed);
    for (const auto& field : env.delta_fields) {
      double lo = 1e300;
      double hi = -1e300;
      for (int i = 0; i < kNormalizationGrid; ++i) {
        for (int j = 0; j < kNormalizationGrid; ++j) {
          const double v = field(vec(i / 200.0, j / 200.0));
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      }
      EXPECT_EQ(lo, 0.0);
      EXPECT_EQ(hi, 1.0);
    }
  }
}

TEST(BuildEnvTest, PatternsArePositivePeriodicAndAntiCorrelated) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto env = build_env(seed);
    double m1 = 0.0, m2 = 0.0;
    for (int t = 0; t < kPeriod; ++t) {
      m1 += env.patterns[0](t) / kPeriod;
      m2 += env.patterns[1](t) / kPeriod;
    }
    double c12 = 0.0, c11 = 0.0, c22 = 0.0;
    for (int t = 0; t < kPeriod; ++t) {
      const double a = env.patterns[0](t);
      const double b = env.patterns[1](t);
      EXPECT_GE(a, kPatternFloor);
      EXPECT_GE(b, kPatternFloor);
      EXPECT_EQ(a, env.patterns[0](t + kPeriod));
      EXPECT_EQ(b, env.patterns[1](t + 3 * kPeriod));
      c12 += (a - m1) * (b - m2);
      c11 += (a - m1) * (a - m1);
      c22 += (b - m2) * (b - m2);
    }
    EXPECT_LE(c12 / std::sqrt(c11 * c22), -0.5) << "seed " << seed;
  }
}

TEST(BuildEnvTest, MetricMeansArePeriodic) {
  const auto env = build_env(7);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const Vector th = vec(u(rng), u(rng));
    for (int k = 0; k < 2; ++k) {
      for (int t = 0; t < kPeriod; ++t) {
        EXPECT_EQ(env.metric_mean(k, th, t), env.metric_mean(k, th, t + kPeriod));
      }
    }
  }
}

TEST(BuildEnvTest, SameSeedSameLandscape) {
  const auto a = build_env(99);
  const auto b = build_env(99);
  EXPECT_EQ(env_to_json(a).dump(), env_to_json(b).dump());
  EXPECT_NE(env_to_json(a).dump(), env_to_json(build_env(98)).dump());
}

TEST(SnapshotTest, JsonRoundTripReproducesLandscape) {
  const auto env = build_env(5);
  const fs::path path = fs::temp_directory_path() / "deltatune_env_snapshot_test.json";
  save_env(env, path);
  const auto back = load_env(path);
  fs::remove(path);
  EXPECT_EQ(env_to_json(back).dump(), env_to_json(env).dump());
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const Vector th = vec(u(rng), u(rng));
    EXPECT_EQ(back.metric_mean(0, th, i), env.metric_mean(0, th, i));
    EXPECT_EQ(back.metric_mean(1, th, i), env.metric_mean(1, th, i));
  }
  EXPECT_THROW(load_env(path), Error);
}

TEST(GroundTruthTest, BaseHasZeroGain) {
  const auto env = build_env(3);
  EXPECT_EQ(true_gain_violation(env, env.base).gain, 0.0);
}

TEST(GroundTruthTest, FlatFieldsGiveConstantGain) {
  auto env = build_env(3);
  for (auto& f : env.delta_fields) {
    f.bumps.clear();
    f.raw_min = 0.0;
    f.raw_max = 0.0;
  }
  const double g = true_gain_violation(env, vec(0.2, 0.3)).gain;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(true_gain_violation(env, vec(u(rng), u(rng))).gain, g);
}

// Gain recomputed from hourly means averaged over one period.
double hourly_gain(const EnvSpec& env, const Vector& th) {
  auto f = [&](const Vector& x) {
    double s = 0.0;
    for (int t = 0; t < kPeriod; ++t) {
      s += env.weights[0] * env.metric_mean(0, x, t) + env.weights[1] * env.metric_mean(1, x, t);
    }
    return s / kPeriod;
  };
  return f(th) / f(env.base) - 1.0;
}

TEST(GroundTruthTest, GridScanOracle) {
  const auto env = build_env(22);
  double best = -1e300;
  Vector best_theta;
  for (int i = 0; i < 200; ++i) {
    for (int j = 0; j < 200; ++j) {
      const Vector th = vec(i / 199.0, j / 199.0);
      const double g = true_gain_violation(env, th).gain;
      EXPECT_NEAR(g, hourly_gain(env, th), 1e-12);
      if (g > best) {
        best = g;
        best_theta = th;
      }
    }
  }
  for (int i = 0; i < 200; ++i) {
    for (int j = 0; j < 200; ++j) {
      EXPECT_LE(true_gain_violation(env, vec(i / 199.0, j / 199.0)).gain, best);
    }
  }
  EXPECT_GT(best, 0.0);
}

TEST(GroundTruthTest, MonteCarloAgreement) {
  const auto env = build_env(1);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  const double f0 = env.objective(env.base);
  for (int q = 0; q < 20; ++q) {
    const Vector th = vec(u(rng), u(rng));
    const int draws = 1'000'000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < draws; ++i) {
      const int t = i % kPeriod;
      const double x1 = env.metric_mean(0, th, t) + env.noise_sd * z(rng);
      const double x2 = env.metric_mean(1, th, t) + env.noise_sd * z(rng);
      const double f = env.weights[0] * x1 + env.weights[1] * x2;
      s += f;
      s2 += f * f;
    }
    const double mean = s / draws;
    const double se = std::sqrt((s2 - s * s / draws) / (draws - 1) / draws);
    const double mc_gain = mean / f0 - 1.0;
    EXPECT_LE(std::abs(mc_gain - true_gain_violation(env, th).gain), 3.0 * se / f0);
  }
}

TEST(GroundTruthTest, DeltaScaleProblemObjectiveEqualsGain) {
  const auto env = build_env(35);
  const auto problem = synthetic_problem(env, SignalMode::kDelta);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const Vector th = vec(u(rng), u(rng));
    Vector delta(2);
    for (int k = 0; k < 2; ++k) delta[k] = env.period_mean(k, th) / env.period_mean(k, env.base) - 1;
    const auto gv = true_gain_violation(env, th);
    EXPECT_NEAR(evaluate_objective(problem, delta), gv.gain, 1e-12);
    const double slack = evaluate_constraints(problem, delta)[0].value -
                         problem.constraints()[0].threshold();
    EXPECT_NEAR(std::max(-slack, 0.0), gv.violation, 1e-12);
  }
}

TEST(StepTest, NoiselessLimitIsExact) {
  auto env = build_env(8);
  env.noise_sd = 0.0;
  Rng rng(1);
  const Vector th = vec(0.4, 0.6);
  const auto batches = step(env, single_plan(0.8, 0.2), one_candidate(th), 5, rng);
  ASSERT_EQ(batches.size(), 1u);
  ASSERT_EQ(batches[0].readings.size(), 2u);
  for (int k = 0; k < 2; ++k) {
    const auto& r = batches[0].readings[static_cast<std::size_t>(k)];
    EXPECT_EQ(r.test.sample_mean, env.metric_mean(k, th, 5));
    EXPECT_EQ(r.test.sample_var, 0.0);
    EXPECT_EQ(r.control.sample_mean, env.metric_mean(k, env.base, 5));
    EXPECT_EQ(r.test.round, 5);
  }
}

TEST(StepTest, GroupSizeFollowsTrafficShare) {
  auto env = build_env(8);
  Rng rng(2);
  const auto b = step(env, single_plan(0.8, 0.2), one_candidate(vec(0.5, 0.5)), 0, rng);
  EXPECT_EQ(b[0].readings[0].test.group_size, 800'000);
  EXPECT_EQ(b[0].readings[0].control.group_size, 200'000);
  env.users = 10;
  const auto tiny = step(env, single_plan(0.01, 0.99), one_candidate(vec(0.5, 0.5)), 0, rng);
  EXPECT_EQ(tiny[0].readings[0].test.group_size, 1);
}

TEST(StepTest, ZeroFractionProducesNoBatch) {
  const auto env = build_env(8);
  Rng rng(3);
  BucketState bucket = one_candidate(vec(0.5, 0.5));
  bucket.add(HyperParam(CandidateId{2}, vec(0.1, 0.1), Bounds::unit(2)), 0);
  RoundPlan p;
  p.assignments = {{CandidateId{1}, 0.8}, {CandidateId{2}, 0.0}};
  p.control_fraction = 0.2;
  const auto batches = step(env, p, bucket, 0, rng);
  ASSERT_EQ(batches.size(), 1u);
  EXPECT_EQ(batches[0].readings[0].test.candidate, CandidateId{1});
}

TEST(StepTest, FixedDelayWithoutJitter) {
  auto env = build_env(8);
  env.xi_sd = 0.0;
  env.xi_mean = 0.0;
  Rng rng(4);
  const auto b = step(env, single_plan(0.8, 0.2), one_candidate(vec(0.5, 0.5)), 5, rng);
  EXPECT_EQ(b[0].origin_round, 5);
  EXPECT_EQ(b[0].arrival_round, 8);
}

TEST(StepTest, RandomDelayNeverPrecedesFixedDelay) {
  auto env = build_env(8);
  env.xi_mean = -1.0;
  Rng rng(5);
  for (int t = 0; t < 500; ++t) {
    const auto b = step(env, single_plan(0.8, 0.2), one_candidate(vec(0.5, 0.5)), t, rng);
    EXPECT_GE(b[0].arrival_round, t + env.fixed_delay);
  }
}

TEST(StepTest, NullComparisonCentersOnZero) {
  auto env = build_env(8);
  env.sampling = Sampling::kDraws;
  env.draws_per_step = 2000;
  Rng rng(6);
  const BucketState bucket = one_candidate(env.base);
  double s = 0.0, s2 = 0.0;
  const int reps = 1000;
  for (int i = 0; i < reps; ++i) {
    const auto b = step(env, single_plan(0.5, 0.5), bucket, i, rng);
    const auto& r = b[0].readings[0];
    const double d = hourly_delta_stat(r.test, r.control).mean;
    s += d;
    s2 += d * d;
  }
  const double mean = s / reps;
  const double se = std::sqrt((s2 - s * s / reps) / (reps - 1) / reps);
  EXPECT_LE(std::abs(mean), 3.0 * se);
}

TEST(StepTest, SameSeedSameBatchStream) {
  const auto env = build_env(10);
  const BucketState bucket = one_candidate(vec(0.3, 0.3));
  Rng a(7);
  Rng b(7);
  for (int t = 0; t < 20; ++t) {
    const auto x = step(env, single_plan(0.8, 0.2), bucket, t, a);
    const auto y = step(env, single_plan(0.8, 0.2), bucket, t, b);
    ASSERT_EQ(x.size(), y.size());
    EXPECT_EQ(x[0].arrival_round, y[0].arrival_round);
    EXPECT_EQ(x[0].readings[1].test.sample_mean, y[0].readings[1].test.sample_mean);
    EXPECT_EQ(x[0].readings[1].test.sample_var, y[0].readings[1].test.sample_var);
  }
}

TEST(StepTest, RejectsPlanNotSummingToOne) {
  const auto env = build_env(10);
  Rng rng(8);
  EXPECT_THROW(step(env, single_plan(0.5, 0.2), one_candidate(vec(0.3, 0.3)), 0, rng),
               InvalidInputError);
}

TEST(DeliveryQueueTest, ReleasesOnlyArrivedInOrder) {
  DeliveryQueue q;
  auto batch = [](std::int64_t origin, std::int64_t arrival, std::uint64_t id) {
    InboundBatch b{origin, arrival, {}};
    GroupReading r{CandidateId{id}, "x1", origin, 1.0, 0.0, 1};
    b.readings.push_back({r, r});
    return b;
  };
  q.push({batch(2, 6, 1), batch(1, 4, 2), batch(0, 4, 3), batch(0, 4, 1)});
  EXPECT_TRUE(q.release(3).empty());
  const auto at4 = q.release(4);
  ASSERT_EQ(at4.size(), 3u);
  EXPECT_EQ(at4[0].origin_round, 0);
  EXPECT_EQ(at4[0].readings[0].test.candidate, CandidateId{1});
  EXPECT_EQ(at4[1].readings[0].test.candidate, CandidateId{3});
  EXPECT_EQ(at4[2].origin_round, 1);
  EXPECT_EQ(q.size(), 1u);
  EXPECT_TRUE(q.release(5).empty());
  EXPECT_EQ(q.release(6).size(), 1u);
  EXPECT_TRUE(q.empty());
  EXPECT_THROW(q.push({batch(5, 4, 1)}), InvalidInputError);
}

}  // namespace
}  // namespace deltatune::sim
