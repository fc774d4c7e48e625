#include <gtest/gtest.h>

#include <set>

#include "bbrtune/env/cc_env.hpp"
#include "gen.hpp"

using namespace bbrtune;
using namespace bbrtune::env;
using check::Gen;

namespace {

harness::ScenarioSpec short_scenario(double duration_s = 10) {
  harness::ScenarioSpec s;
  s.name = "short";
  s.seed = 21;
  s.duration_s = duration_s;
  s.capacity_bps = 10e6;
  s.rtt_ms = 40;
  harness::EventSpec e;
  e.at_s = 4;
  e.type = "set_bandwidth";
  e.value = 5e6;
  s.events.push_back(e);
  return s;
}

FlowRow row(FlowId id, double v) {
  FlowRow r;
  r.flow_id = id;
  r.f.fill(v);
  return r;
}

}  // namespace

TEST(State, PadsMissingFlowsWithZeros) {
  std::mt19937_64 rng(1);
  StateScales sc;
  const auto t = build_state({row(3, 1e9), row(1, 1e9), row(2, 1e9)}, 8, sc, rng);
  ASSERT_EQ(t.data.size(), 8 * kNumFeatures);
  EXPECT_EQ(t.flow_ids, (std::vector<FlowId>{1, 2, 3}));
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 0; c < kNumFeatures; ++c) EXPECT_EQ(t.at(r, c), r < 3 ? 1.0 : 0.0);
}

TEST(State, NoFlowsIsAllZero) {
  std::mt19937_64 rng(1);
  const auto t = build_state({}, 4, StateScales{}, rng);
  EXPECT_EQ(t.data, std::vector<double>(4 * kNumFeatures, 0.0));
  EXPECT_TRUE(t.flow_ids.empty());
}

TEST(State, SamplesDistinctSortedSubsetWhenOverfull) {
  Gen g(2);
  std::set<FlowId> seen;
  for (int k = 0; k < 200; ++k) {
    std::vector<FlowRow> rows;
    for (FlowId f = 1; f <= 12; ++f) rows.push_back(row(f, 0.5));
    std::mt19937_64 rng(static_cast<std::uint64_t>(g.integer(0, 1 << 30)));
    const auto t = build_state(rows, 8, StateScales{}, rng);
    ASSERT_EQ(t.flow_ids.size(), 8u);
    ASSERT_TRUE(std::is_sorted(t.flow_ids.begin(), t.flow_ids.end()));
    ASSERT_EQ(std::set<FlowId>(t.flow_ids.begin(), t.flow_ids.end()).size(), 8u);
    seen.insert(t.flow_ids.begin(), t.flow_ids.end());
  }
  EXPECT_EQ(seen.size(), 12u);
}

TEST(State, FeaturesClampedToUnitInterval) {
  Gen g(3);
  for (int k = 0; k < 1000; ++k) {
    FlowRow r;
    r.flow_id = 1;
    for (double& v : r.f) v = g.uniform(-1e9, 1e9);
    r.f[g.index(kNumFeatures)] = std::nan("");
    std::mt19937_64 rng(0);
    for (double v : build_state({r}, 2, StateScales{}, rng).data) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
  }
}

TEST(Action, DecodeExamples) {
  const ActionGrid grid;
  EXPECT_EQ(grid.decode(0, 0), (Windows{500, 2}));
  EXPECT_EQ(grid.decode(4, 2), kVanillaWindows);
  EXPECT_EQ(grid.decode(2, 4), (Windows{2000, 32}));
  EXPECT_THROW(grid.decode(5, 0), std::out_of_range);
  EXPECT_THROW(grid.decode(0, 5), std::out_of_range);
}

TEST(Action, IndexOfInvertsDecode) {
  const ActionGrid grid;
  for (std::size_t i = 0; i < grid.k_rt(); ++i)
    for (std::size_t j = 0; j < grid.k_bw(); ++j) {
      std::size_t a = 99, b = 99;
      ASSERT_TRUE(grid.index_of(grid.decode(i, j), a, b));
      EXPECT_EQ(a, i);
      EXPECT_EQ(b, j);
    }
  EXPECT_FALSE(grid.contains(Windows{1234, 8}));
  EXPECT_FALSE(grid.contains(Windows{1000, 3}));
}

TEST(Reward, Examples) {
  RewardConfig cfg;
  IntervalStats st;
  st.samples = 20;
  st.mean_throughput_bps = 16e6;
  EXPECT_NEAR(compute_reward(st, cfg).value, 0.65, 1e-12);
  st.mean_throughput_bps = 0;
  EXPECT_NEAR(compute_reward(st, cfg).value, 0.25, 1e-12);
  st.mean_throughput_bps = 20e6;
  st.mean_abs_error_us = 1e9;
  EXPECT_NEAR(compute_reward(st, cfg).value, 0.5, 1e-12);
  cfg.double_sigmoid = true;
  st.mean_abs_error_us = 0;
  EXPECT_NEAR(compute_reward(st, cfg).value, 1.0, 1e-12);
}

TEST(Reward, NoSamplesIsFlaggedNotScored) {
  const auto r = compute_reward(IntervalStats{}, RewardConfig{});
  EXPECT_TRUE(r.no_data);
  EXPECT_EQ(r.value, 0.0);
}

TEST(Reward, BoundedAndMonotone) {
  Gen g(4);
  RewardConfig cfg;
  for (int k = 0; k < 10000; ++k) {
    cfg.alpha = g.uniform(0, 1);
    IntervalStats st;
    st.samples = 1;
    st.mean_throughput_bps = g.uniform(0, cfg.normalizer_bps);
    st.mean_abs_error_us = g.uniform(0, 1e6);
    const double r = compute_reward(st, cfg).value;
    ASSERT_GE(r, 0.0);
    ASSERT_LE(r, 1.0);
    auto more = st;
    more.mean_throughput_bps += g.uniform(0, 1e6);
    ASSERT_GE(compute_reward(more, cfg).value, r);
    auto worse = st;
    worse.mean_abs_error_us += g.uniform(0, 1e5);
    ASSERT_LE(compute_reward(worse, cfg).value, r);
  }
}

TEST(Pid, DerivativeIsSlopeOfSmoothedRtt) {
  RewardConfig cfg;
  cfg.kd = 1;
  std::vector<PidSample> series;
  for (int k = 0; k < 20; ++k) series.push_back({10e6, 0.040 + 0.001 * k, 0.040, 0.040});
  const auto t = pid_terms(series, 0.1, cfg);
  EXPECT_NEAR(t.d, 0.010, 1e-12);
  EXPECT_EQ(t.p, 0.0);
  EXPECT_EQ(t.i, 0.0);
}

TEST(Pid, ProportionalAndIntegralTerms) {
  RewardConfig cfg;
  cfg.kp = 2;
  cfg.ki = 3;
  std::vector<PidSample> series(10, PidSample{10e6, 0.05, 0.04, 0.05});
  const auto t = pid_terms(series, 0.1, cfg);
  EXPECT_NEAR(t.p, 2 * 0.5 / 0.04, 1e-12);
  EXPECT_NEAR(t.i, 3 * 10 * 0.01 * 0.1, 1e-12);
  series[0].latency_s = 0;
  for (auto& s : series) s.latency_s = 0;
  EXPECT_THROW(pid_terms(series, 0.1, cfg), std::domain_error);
}

TEST(CcEnv, StepCoversTwentyMonitorTicks) {
  CcEnvOptions opt;
  opt.vary_seed = false;
  CcEnv env(short_scenario(), opt);
  const auto s0 = env.reset();
  ASSERT_EQ(s0.size(), env.state_dim());
  for (int k = 0; k < 3; ++k) {
    const auto r = env.step(4, 2);
    ASSERT_EQ(r.state.size(), env.state_dim());
    EXPECT_EQ(env.records().back().samples, 20u);
    EXPECT_FALSE(r.done);
  }
}

TEST(CcEnv, LastStepIsTruncatedAndTerminal) {
  CcEnvOptions opt;
  opt.vary_seed = false;
  CcEnv env(short_scenario(5), opt);
  env.reset();
  EXPECT_FALSE(env.step(4, 2).done);
  const auto last = env.step(4, 2);
  EXPECT_TRUE(last.done);
  EXPECT_EQ(env.simulator().now(), 5 * kUsPerSec);
  EXPECT_EQ(env.records().back().samples, 10u);
}

TEST(CcEnv, VanillaActionLeavesTheTraceUntouched) {
  const auto spec = short_scenario();
  CcEnvOptions opt;
  opt.vary_seed = false;
  opt.record_trace = true;
  CcEnv env(spec, opt);
  env.reset();
  while (!env.step(4, 2).done) {
  }
  auto plain = make_simulator(spec, spec.seed, true);
  plain->run_until(spec.duration_us());
  EXPECT_EQ(env.simulator().trace().to_csv(), plain->trace().to_csv());
}

TEST(CcEnv, SameSeedSameStatesAndRewards) {
  CcEnvOptions opt;
  opt.vary_seed = false;
  CcEnv a(short_scenario(), opt), b(short_scenario(), opt);
  EXPECT_EQ(a.reset(), b.reset());
  Gen g(5);
  for (int k = 0; k < 4; ++k) {
    const std::size_t i = g.index(5), j = g.index(5);
    const auto ra = a.step(i, j), rb = b.step(i, j);
    ASSERT_EQ(ra.state, rb.state);
    ASSERT_EQ(ra.reward, rb.reward);
  }
}

TEST(CcEnv, TrainingEpisodesDrawFreshInstances) {
  CcEnv env(short_scenario());
  env.reset();
  const auto first = env.current_seed();
  env.reset();
  EXPECT_NE(env.current_seed(), first);
}

TEST(CcEnv, StepBeforeResetThrows) {
  CcEnv env(short_scenario());
  EXPECT_THROW(env.step(0, 0), std::logic_error);
}
