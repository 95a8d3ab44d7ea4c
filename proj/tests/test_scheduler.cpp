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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "deltatune/errors.hpp"
#include "deltatune/scheduler.hpp"
#include "deltatune/storage.hpp"
#include "deltatune/text_io.hpp"

namespace deltatune {
namespace {

namespace fs = std::filesystem;

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

TuningProblem two_metric_problem() {
  return TuningProblem({{"x1"}, {"x2"}}, FunctionExpr::linear(vec({0.296, 1.165})),
                       {{FunctionExpr::linear(vec({0.149, 0.703})), -0.05, Direction::kAtLeast}},
                       HyperParam(CandidateId{0}, vec({0.011, 0.985}), Bounds::unit(2)));
}

SchedulerConfig small_config() {
  SchedulerConfig c;
  c.repetitions = 200;
  c.proposal_samples = 50;
  c.initial.grid_per_dim = 4;
  return c;
}

// Readings for one hour of a plan: delta_k(theta) = 0.05 * theta_k - 0.02.
InboundBatch fake_hour(const SchedulerState& state, const RoundPlan& plan, std::int64_t t,
                       std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, 0.5);
  InboundBatch b{t, t, {}};
  for (const auto& [id, frac] : plan.assignments) {
    const Vector& theta = state.bucket.at(id).theta();
    for (int k = 0; k < 2; ++k) {
      const std::string metric = k == 0 ? "x1" : "x2";
      const double delta = 0.05 * theta[k] - 0.02;
      GroupReading test{id, metric, t, 100.0 * (1.0 + delta) + noise(rng), 400.0, 1000};
      GroupReading control{CandidateId{0}, metric, t, 100.0 + noise(rng), 400.0, 1000};
      b.readings.push_back({test, control});
    }
  }
  return b;
}

double plan_total(const RoundPlan& p) { return p.total(); }

TEST(AllocateTrafficTest, MultiplicityExample) {
  const std::vector<CandidateId> picks = {CandidateId{1}, CandidateId{1}, CandidateId{2}};
  const auto plan = allocate_traffic(4, picks, {}, 0.2);
  EXPECT_NEAR(plan.fraction(CandidateId{1}), 0.8 * 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(plan.fraction(CandidateId{2}), 0.8 / 3.0, 1e-15);
  EXPECT_NEAR(plan.fraction(CandidateId{1}), 0.5333333333333333, 1e-12);
  EXPECT_NEAR(plan.fraction(CandidateId{2}), 0.2666666666666667, 1e-12);
  EXPECT_NEAR(plan_total(plan), 1.0, 1e-12);
  EXPECT_EQ(plan.round, 4);
}

TEST(AllocateTrafficTest, ProposalGetsOneUnit) {
  const std::vector<CandidateId> picks(3, CandidateId{1});
  const std::vector<CandidateId> proposed = {CandidateId{9}};
  const auto plan = allocate_traffic(0, picks, proposed, 0.2);
  EXPECT_NEAR(plan.fraction(CandidateId{9}), 0.2, 1e-15);
  EXPECT_NEAR(plan.fraction(CandidateId{1}), 0.6, 1e-15);
}

TEST(AllocateTrafficTest, FractionsAlwaysSumToOne) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::uint64_t> id(1, 37);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<CandidateId> picks(1 + trial * 5);
    for (auto& p : picks) p = CandidateId{id(rng)};
    const double cf = std::uniform_real_distribution<double>(0.01, 0.99)(rng);
    EXPECT_NEAR(allocate_traffic(0, picks, {}, cf).total(), 1.0, 1e-12);
  }
}

TEST(ModalPickTest, HighestMultiplicityThenLowestId) {
  const std::vector<CandidateId> a = {CandidateId{5}, CandidateId{3}, CandidateId{5}};
  EXPECT_EQ(modal_pick(a), CandidateId{5});
  const std::vector<CandidateId> b = {CandidateId{5}, CandidateId{3}, CandidateId{5},
                                      CandidateId{3}};
  EXPECT_EQ(modal_pick(b), CandidateId{3});
  EXPECT_THROW(modal_pick(std::span<const CandidateId>{}), NoDataError);
}

TEST(BootstrapTest, GridOfHundred) {
  SchedulerConfig c;
  const auto [state, plan] = bootstrap(c, two_metric_problem(), 1);
  ASSERT_EQ(state.bucket.candidates.size(), 100u);
  std::set<std::pair<int, int>> nodes;
  for (const auto& hp : state.bucket.candidates) {
    const double a = hp.theta()[0] * 9.0;
    const double b = hp.theta()[1] * 9.0;
    EXPECT_NEAR(a, std::round(a), 1e-12);
    EXPECT_NEAR(b, std::round(b), 1e-12);
    nodes.insert({static_cast<int>(std::lround(a)), static_cast<int>(std::lround(b))});
  }
  EXPECT_EQ(nodes.size(), 100u);
  ASSERT_EQ(plan.assignments.size(), 100u);
  for (const auto& [id, f] : plan.assignments) EXPECT_NEAR(f, 0.8 / 100.0, 1e-15);
  EXPECT_NEAR(plan.total(), 1.0, 1e-12);
  EXPECT_EQ(plan.round, 0);
}

TEST(BootstrapTest, ExplicitAndUniform) {
  SchedulerConfig c;
  c.initial.kind = InitialBucket::Kind::kExplicit;
  c.initial.points = {vec({0.1, 0.2}), vec({0.3, 0.4}), vec({0.5, 0.6})};
  const auto [s1, p1] = bootstrap(c, two_metric_problem(), 1);
  ASSERT_EQ(s1.bucket.candidates.size(), 3u);
  EXPECT_EQ(s1.bucket.candidates[1].theta(), vec({0.3, 0.4}));

  c.initial.points.clear();
  EXPECT_THROW(bootstrap(c, two_metric_problem(), 1), ConfigError);

  c.initial.kind = InitialBucket::Kind::kUniform;
  c.initial.count = 25;
  const auto a = bootstrap(c, two_metric_problem(), 77).first;
  const auto b = bootstrap(c, two_metric_problem(), 77).first;
  ASSERT_EQ(a.bucket.candidates.size(), 25u);
  for (std::size_t i = 0; i < 25; ++i) {
    EXPECT_EQ(a.bucket.candidates[i].theta(), b.bucket.candidates[i].theta());
  }
}

TEST(RunRoundTest, ColdStartWithoutExposure) {
  SchedulerState state;
  state.bucket.add(HyperParam(CandidateId{1}, vec({0.5, 0.5}), Bounds::unit(2)), 0);
  state.round = 1;
  state.next_id = 2;
  auto c = small_config();
  c.proposal_probability = 0.0;
  EXPECT_THROW(run_round(state, {}, two_metric_problem(), c), ColdStartError);
}

TEST(RunRoundTest, ReexposesWhileFeedbackInFlight) {
  auto c = small_config();
  auto [state, plan0] = bootstrap(c, two_metric_problem(), 3);
  const auto out = run_round(state, {}, two_metric_problem(), c);
  EXPECT_FALSE(out.selection.has_value());
  EXPECT_EQ(out.plan.assignments.size(), state.bucket.candidates.size());
  EXPECT_EQ(out.plan.round, 1);
  EXPECT_EQ(state.round, 2);
}

TEST(RunRoundTest, NonBlockingWithStaleData) {
  auto c = small_config();
  const auto problem = two_metric_problem();
  auto [state, plan0] = bootstrap(c, problem, 5);
  std::mt19937_64 env(1);
  const auto hour0 = fake_hour(state, plan0, 0, env);
  run_round(state, std::vector<InboundBatch>{hour0}, problem, c);
  for (int t = 0; t < 5; ++t) {
    const std::size_t before = state.record.size();
    const auto out = run_round(state, {}, problem, c);
    EXPECT_TRUE(out.selection.has_value());
    EXPECT_FALSE(out.plan.assignments.empty());
    EXPECT_NEAR(out.plan.total(), 1.0, 1e-12);
    EXPECT_EQ(state.record.size(), before);
  }
}

TEST(RunRoundTest, BucketSizeWithAndWithoutProposals) {
  const auto problem = two_metric_problem();
  for (double p : {0.0, 1.0}) {
    auto c = small_config();
    c.proposal_probability = p;
    auto [state, plan] = bootstrap(c, problem, 9);
    const std::size_t b0 = state.bucket.candidates.size();
    std::mt19937_64 env(2);
    std::size_t last = b0;
    const int rounds = 12;
    for (int t = 1; t <= rounds; ++t) {
      const auto hour = fake_hour(state, plan, t - 1, env);
      plan = run_round(state, std::vector<InboundBatch>{hour}, problem, c).plan;
      EXPECT_GE(state.bucket.candidates.size(), last);
      last = state.bucket.candidates.size();
    }
    if (p == 0.0) {
      EXPECT_EQ(last, b0);
    } else {
      EXPECT_LE(last, b0 + rounds);
      EXPECT_GT(last, b0);
    }
  }
}

TEST(RunRoundTest, DuplicatesAndUnknownsAreCounted) {
  auto c = small_config();
  const auto problem = two_metric_problem();
  auto [state, plan0] = bootstrap(c, problem, 11);
  std::mt19937_64 env(3);
  auto hour = fake_hour(state, plan0, 0, env);
  auto bogus = hour.readings.front();
  bogus.test.candidate = CandidateId{999};
  hour.readings.push_back(bogus);
  auto other_metric = hour.readings.front();
  other_metric.test.metric = "nope";
  other_metric.control.metric = "nope";
  hour.readings.push_back(other_metric);
  const std::vector<InboundBatch> twice = {hour, hour};
  const auto out = run_round(state, twice, problem, c);
  EXPECT_EQ(out.absorbed, 2 * 16u);
  EXPECT_EQ(out.duplicates, 2 * 16u);
  EXPECT_EQ(out.ignored, 4u);
}

TEST(RunRoundTest, OrderIndependentAbsorption) {
  auto c = small_config();
  const auto problem = two_metric_problem();
  auto [base_state, plan0] = bootstrap(c, problem, 13);
  std::mt19937_64 env(4);
  std::vector<InboundBatch> batches;
  for (int t = 0; t < 6; ++t) batches.push_back(fake_hour(base_state, plan0, t, env));

  std::mt19937_64 shuf(5);
  SchedulerState reference = base_state;
  run_round(reference, batches, problem, c);
  for (int trial = 0; trial < 5; ++trial) {
    auto order = batches;
    std::shuffle(order.begin(), order.end(), shuf);
    SchedulerState s = base_state;
    run_round(s, order, problem, c);
    for (const auto& hp : s.bucket.candidates) {
      if (base_state.bucket.contains(hp.id()) == false) continue;
      for (const char* m : {"x1", "x2"}) {
        const auto a = reference.record.aggregate(hp.id(), m);
        const auto b = s.record.aggregate(hp.id(), m);
        ASSERT_TRUE(a && b);
        EXPECT_NEAR(a->mean, b->mean, 1e-12 * std::abs(a->mean) + 1e-18);
        EXPECT_NEAR(a->var, b->var, 1e-12 * a->var);
      }
    }
  }
}

std::vector<RoundPlan> seeded_run(std::uint64_t seed, int rounds) {
  auto c = small_config();
  const auto problem = two_metric_problem();
  auto [state, plan] = bootstrap(c, problem, seed);
  std::mt19937_64 env(seed + 1);
  std::vector<RoundPlan> plans = {plan};
  for (int t = 1; t <= rounds; ++t) {
    const auto hour = fake_hour(state, plan, t - 1, env);
    plan = run_round(state, std::vector<InboundBatch>{hour}, problem, c).plan;
    plans.push_back(plan);
  }
  return plans;
}

TEST(RunRoundTest, SeedDeterminism) {
  const auto a = seeded_run(21, 8);
  const auto b = seeded_run(21, 8);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].assignments, b[i].assignments);
  }
}

class PersistTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("deltatune_persist_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
            "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

std::string slurp_dir(const fs::path& dir) {
  std::string out;
  for (const char* f : {"hyperparams.tsv", "metrics.tsv", "estimates.tsv", "manifest.json"}) {
    out += io::read_file(dir / f);
  }
  return out;
}

TEST_F(PersistTest, RoundTripIsByteIdentical) {
  auto c = small_config();
  const auto problem = two_metric_problem();
  auto [state, plan] = bootstrap(c, problem, 31);
  std::mt19937_64 env(6);
  for (int t = 1; t <= 5; ++t) {
    const auto hour = fake_hour(state, plan, t - 1, env);
    plan = run_round(state, std::vector<InboundBatch>{hour}, problem, c).plan;
  }
  persist(state, c, problem, dir_ / "a");
  const auto snap = restore(dir_ / "a");
  persist(snap.state, snap.config, snap.problem, dir_ / "b");
  EXPECT_EQ(slurp_dir(dir_ / "a"), slurp_dir(dir_ / "b"));
  EXPECT_EQ(snap.state.round, state.round);
  EXPECT_EQ(snap.state.next_id, state.next_id);
  EXPECT_EQ(rng_state(snap.state.rng), rng_state(state.rng));
  for (const auto& hp : state.bucket.candidates) {
    const auto a = state.record.aggregate(hp.id(), "x1");
    const auto b = snap.state.record.aggregate(hp.id(), "x1");
    ASSERT_EQ(a.has_value(), b.has_value());
    if (a) {
      EXPECT_EQ(a->mean, b->mean);
      EXPECT_EQ(a->var, b->var);
    }
  }
}

TEST_F(PersistTest, RestoreThenContinueMatchesUninterrupted) {
  auto c = small_config();
  const auto problem = two_metric_problem();
  auto [state, plan] = bootstrap(c, problem, 41);
  std::mt19937_64 env(7);
  std::vector<InboundBatch> hours;
  // Precompute hourly feedback on the fly from whichever state is live.
  for (int t = 1; t <= 4; ++t) {
    hours.push_back(fake_hour(state, plan, t - 1, env));
    plan = run_round(state, std::vector<InboundBatch>{hours.back()}, problem, c).plan;
  }
  persist(state, c, problem, dir_);
  const std::string env_state = rng_state(env);

  SchedulerState live = state;
  RoundPlan live_plan = plan;
  std::vector<RoundPlan> uninterrupted;
  for (int t = 5; t <= 9; ++t) {
    const auto hour = fake_hour(live, live_plan, t - 1, env);
    live_plan = run_round(live, std::vector<InboundBatch>{hour}, problem, c).plan;
    uninterrupted.push_back(live_plan);
  }

  auto snap = restore(dir_);
  auto env2 = rng_from_state(env_state);
  RoundPlan resumed_plan = plan;
  for (int t = 5; t <= 9; ++t) {
    const auto hour = fake_hour(snap.state, resumed_plan, t - 1, env2);
    resumed_plan = run_round(snap.state, std::vector<InboundBatch>{hour}, snap.problem,
                             snap.config).plan;
    EXPECT_EQ(resumed_plan.assignments, uninterrupted[static_cast<std::size_t>(t - 5)].assignments);
  }
}

TEST_F(PersistTest, MissingMetricFileFails) {
  auto c = small_config();
  const auto problem = two_metric_problem();
  auto [state, plan] = bootstrap(c, problem, 51);
  persist(state, c, problem, dir_);
  fs::remove(dir_ / "metrics.tsv");
  EXPECT_THROW(restore(dir_), RestoreError);
}

TEST_F(PersistTest, VersionMismatchAndCorruptionFail) {
  auto c = small_config();
  const auto problem = two_metric_problem();
  auto [state, plan] = bootstrap(c, problem, 61);
  persist(state, c, problem, dir_);
  auto manifest = nlohmann::json::parse(io::read_file(dir_ / "manifest.json"));
  manifest["version"] = kStateFormatVersion + 1;
  io::write_file_atomic(dir_ / "manifest.json", manifest.dump());
  EXPECT_THROW(restore(dir_), RestoreError);

  persist(state, c, problem, dir_);
  io::write_file_atomic(dir_ / "hyperparams.tsv", "garbage\n");
  EXPECT_THROW(restore(dir_), RestoreError);

  EXPECT_THROW(restore(dir_ / "does_not_exist"), RestoreError);
}

TEST(SchedulerConfigTest, JsonRoundTripAndValidation) {
  SchedulerConfig c;
  c.repetitions = 17;
  c.taylor_mode = TaylorMode::kLiteral;
  c.signal = SignalMode::kRaw;
  c.initial.kind = InitialBucket::Kind::kExplicit;
  c.initial.points = {vec({0.25, 0.75})};
  const auto j = config_to_json(c);
  EXPECT_EQ(config_to_json(config_from_json(j)).dump(), j.dump());

  SchedulerConfig bad;
  bad.control_fraction = 1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = SchedulerConfig{};
  bad.proposal_probability = 1.5;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = SchedulerConfig{};
  bad.repetitions = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

}  // namespace
}  // namespace deltatune
