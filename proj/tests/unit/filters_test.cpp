#include <gtest/gtest.h>

#include "bbrtune/agents/host_agent.hpp"
#include "bbrtune/env/cc_env.hpp"
#include "gen.hpp"

using namespace bbrtune;
using namespace bbrtune::agents;
using check::Gen;

TEST(Filters, EmaExample) {
  const auto y = ema_filter({10, 20, 20, 0}, 0.5);
  EXPECT_EQ(y, (std::vector<double>{10, 15, 17.5, 8.75}));
}

TEST(Filters, MovingAverageExample) {
  const auto y = moving_average({1, 2, 3, 4, 5, 6}, 3);
  EXPECT_EQ(y, (std::vector<double>{1, 1.5, 2, 3, 4, 5}));
}

TEST(Filters, RejectBadParameters) {
  EXPECT_THROW(ema_filter({1}, 0.0), std::invalid_argument);
  EXPECT_THROW(ema_filter({1}, 1.5), std::invalid_argument);
  EXPECT_THROW(moving_average({1}, 0), std::invalid_argument);
  EXPECT_THROW(Ema(0.0), std::invalid_argument);
}

TEST(Filters, OutputsStayWithinInputRange) {
  Gen g(1);
  for (int k = 0; k < 500; ++k) {
    const auto x = g.vec(1 + g.index(100), -1e6, 1e6);
    const double lo = *std::min_element(x.begin(), x.end()), hi = *std::max_element(x.begin(), x.end());
    const double slack = 1e-9 * std::max(std::abs(lo), std::abs(hi));
    for (double v : ema_filter(x, g.uniform(0.01, 1))) {
      ASSERT_GE(v, lo - slack);
      ASSERT_LE(v, hi + slack);
    }
    for (double v : moving_average(x, 1 + g.index(10))) {
      ASSERT_GE(v, lo - slack);
      ASSERT_LE(v, hi + slack);
    }
  }
}

TEST(Filters, MovingAverageMatchesDirectMean) {
  Gen g(2);
  for (int k = 0; k < 500; ++k) {
    const auto x = g.vec(1 + g.index(60), -100, 100);
    const std::size_t w = 1 + g.index(12);
    const auto y = moving_average(x, w);
    for (std::size_t t = 0; t < x.size(); ++t) {
      const std::size_t from = t + 1 >= w ? t + 1 - w : 0;
      double s = 0;
      for (std::size_t i = from; i <= t; ++i) s += x[i];
      ASSERT_NEAR(y[t], s / static_cast<double>(t + 1 - from), 1e-9);
    }
  }
}

TEST(Filters, ConstantInputIsAFixedPoint) {
  Gen g(3);
  for (int k = 0; k < 100; ++k) {
    const double c = g.uniform(-50, 50);
    const std::vector<double> x(40, c);
    for (double v : ema_filter(x, g.uniform(0.01, 1))) ASSERT_NEAR(v, c, 1e-12);
    for (double v : moving_average(x, 1 + g.index(8))) ASSERT_NEAR(v, c, 1e-12);
  }
}

TEST(Filters, StatefulEmaMatchesBatchFilter) {
  Gen g(4);
  const auto x = g.vec(200, 0, 1);
  Ema e(0.3);
  const auto y = ema_filter(x, 0.3);
  for (std::size_t t = 0; t < x.size(); ++t) ASSERT_EQ(e.update(x[t]), y[t]);
}

TEST(Sanity, Examples) {
  RobustnessConfig cfg;
  Measurement ok{40'000.0, 10e6, 20e6};
  EXPECT_TRUE(sanity_check(ok, std::nullopt, std::nullopt, cfg).accept);

  auto m = ok;
  m.rtt_us = -5;
  EXPECT_EQ(sanity_check(m, std::nullopt, std::nullopt, cfg).rule, SanityRule::kRtt);
  m = ok;
  m.rtt_us = 20e6;
  EXPECT_EQ(sanity_check(m, std::nullopt, std::nullopt, cfg).rule, SanityRule::kRtt);
  m = ok;
  m.rate_bps = 31e6;
  EXPECT_EQ(sanity_check(m, std::nullopt, std::nullopt, cfg).rule, SanityRule::kRate);
  m.rate_bps = 29e6;
  EXPECT_TRUE(sanity_check(m, std::nullopt, std::nullopt, cfg).accept);
  m.rate_bps = std::nan("");
  EXPECT_EQ(sanity_check(m, std::nullopt, std::nullopt, cfg).rule, SanityRule::kRate);

  EXPECT_EQ(sanity_check(ok, std::nullopt, 11.0, cfg).rule, SanityRule::kReward);
  EXPECT_EQ(sanity_check(ok, ActionCheck{5, 0, 5, 5}, std::nullopt, cfg).rule, SanityRule::kAction);
  EXPECT_TRUE(sanity_check(ok, ActionCheck{4, 4, 5, 5}, 0.5, cfg).accept);
}

TEST(Sanity, RandomTuplesMatchTheRuleOracle) {
  Gen g(5);
  RobustnessConfig cfg;
  for (int k = 0; k < 100000; ++k) {
    Measurement m;
    m.capacity_bps = g.uniform(1e6, 1e8);
    if (g.coin(0.9)) m.rtt_us = g.uniform(-1e5, 2e7);
    if (g.coin(0.9)) m.rate_bps = g.uniform(-1e6, 2.0 * m.capacity_bps);
    std::optional<double> r;
    if (g.coin(0.5)) r = g.uniform(-20, 20);
    std::optional<ActionCheck> a;
    if (g.coin(0.5)) a = ActionCheck{g.index(7), g.index(7), 5, 5};
    const bool expect = (!m.rtt_us || (*m.rtt_us >= 1 && *m.rtt_us <= 10e6)) &&
                        (!m.rate_bps || (*m.rate_bps >= 0 && *m.rate_bps <= 1.5 * m.capacity_bps)) &&
                        (!r || (*r >= -10 && *r <= 10)) && (!a || (a->i_rt < 5 && a->i_bw < 5));
    ASSERT_EQ(sanity_check(m, a, r, cfg).accept, expect) << "case " << k;
  }
}

namespace {

std::unique_ptr<netsim::Simulator> one_flow_sim() {
  netsim::SimConfig c;
  c.seed = 3;
  auto sim = std::make_unique<netsim::Simulator>(c);
  sim->schedule({0, netsim::FlowJoin{1}});
  sim->run_until(kUsPerSec);
  return sim;
}

}  // namespace

TEST(HostAgent, TunerWriteIsReadBack) {
  auto sim = one_flow_sim();
  HostAgent host({}, *sim);
  const env::ActionGrid grid;
  ASSERT_TRUE(host.tuner_apply({2000, 16}, grid).ok);
  EXPECT_EQ(host.windows(), (env::Windows{2000, 16}));
  EXPECT_DOUBLE_EQ(sim->bbr(1).rtprop_window_s(), 2.0);
  EXPECT_EQ(sim->bbr(1).btlbw_window_rounds(), 16u);
}

TEST(HostAgent, OutOfRangeWriteRejectedAndPreviousKept) {
  auto sim = one_flow_sim();
  HostAgent host({}, *sim);
  const env::ActionGrid grid;
  ASSERT_TRUE(host.tuner_apply({1000, 4}, grid).ok);
  for (env::Windows w : {env::Windows{100, 4}, env::Windows{20000, 4}, env::Windows{1000, 1}, env::Windows{1000, 64}}) {
    const auto r = host.tuner_apply(w, grid);
    EXPECT_FALSE(r.ok);
    EXPECT_FALSE(r.error.empty());
  }
  EXPECT_EQ(host.windows(), (env::Windows{1000, 4}));
  EXPECT_DOUBLE_EQ(sim->bbr(1).rtprop_window_s(), 1.0);
  EXPECT_EQ(sim->bbr(1).btlbw_window_rounds(), 4u);
}

TEST(HostAgent, ReapplyingSameWindowsLeavesTraceUnchanged) {
  netsim::SimConfig c;
  c.seed = 8;
  c.record_trace = true;
  netsim::Simulator a(c), b(c);
  for (auto* s : {&a, &b}) s->schedule({0, netsim::FlowJoin{1}});
  HostAgent ha({}, a), hb({}, b);
  const env::ActionGrid grid;
  ha.tuner_apply({2000, 4}, grid);
  hb.tuner_apply({2000, 4}, grid);
  for (int k = 1; k <= 100; ++k) {
    a.advance_to(k * 100 * kUsPerMs);
    b.advance_to(k * 100 * kUsPerMs);
    ha.monitor_tick();
    hb.monitor_tick();
    if (k % 5 == 0) hb.tuner_apply({2000, 4}, grid);
    if (k % 20 == 0) {
      const auto ra = ha.report(), rb = hb.report();
      ASSERT_TRUE(ra == rb) << "tick " << k;
    }
  }
  EXPECT_EQ(a.trace().to_csv(), b.trace().to_csv());
}

TEST(HostAgent, ReportAggregatesTicks) {
  auto sim = one_flow_sim();
  HostAgentConfig cfg;
  HostAgent host(cfg, *sim);
  for (int k = 0; k < 20; ++k) {
    sim->advance_to(sim->now() + cfg.t1_us);
    host.monitor_tick();
  }
  const auto rep = host.report();
  EXPECT_EQ(rep.interval.samples, 20u);
  EXPECT_EQ(rep.series.size(), 20u);
  ASSERT_EQ(rep.rows.size(), 1u);
  EXPECT_NEAR(rep.interval.mean_throughput_bps, 20e6, 2e6);
  const auto next = host.report();
  EXPECT_EQ(next.interval.samples, 0u);
  EXPECT_EQ(next.epoch, rep.epoch + 1);
}
