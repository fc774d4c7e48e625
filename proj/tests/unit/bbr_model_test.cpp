#include <gtest/gtest.h>

#include <numeric>
#include <set>

#include "bbrtune/bbr/bbr_model.hpp"
#include "gen.hpp"

using namespace bbrtune;
using bbr::AckSample;
using bbr::BbrModel;
using bbr::Phase;

namespace {

constexpr SimTime kMs = kUsPerMs;

AckSample ack(SimTime now, SimTime rtt, std::optional<double> rate, bool round_start, std::int64_t inflight) {
  AckSample s;
  s.now = now;
  s.rtt = rtt;
  s.delivery_rate_bps = rate;
  s.round_start = round_start;
  s.inflight_bytes = inflight;
  return s;
}

// Feeds constant 20 Mbps / 40 ms rounds until the pipe is full, then one ACK
// with a drained pipe. Returns the time of that last ACK.
SimTime drive_to_probe_bw(BbrModel& m) {
  SimTime t = 0;
  for (int r = 0; r < 20 && !m.filled_pipe(); ++r) {
    t += 40 * kMs;
    m.on_ack(ack(t, 40 * kMs, 20e6, true, 1'000'000));
  }
  t += kMs;
  m.on_ack(ack(t, 40 * kMs, 20e6, false, 10 * kMss));
  return t;
}

}  // namespace

TEST(BbrModel, FreshFlowStartsInStartupWithDefaults) {
  BbrModel m;
  EXPECT_EQ(m.phase(), Phase::kStartup);
  EXPECT_NEAR(m.pacing_gain(), 2.885, 1e-3);
  EXPECT_DOUBLE_EQ(m.rtprop_window_s(), 10.0);
  EXPECT_EQ(m.btlbw_window_rounds(), 8u);
  EXPECT_DOUBLE_EQ(bbr::kDrainGain * bbr::kHighGain, 1.0);
}

TEST(BbrModel, GainCycleAveragesToOne) {
  const double sum = std::accumulate(bbr::kPacingGainCycle.begin(), bbr::kPacingGainCycle.end(), 0.0);
  EXPECT_DOUBLE_EQ(sum, 8.0);
}

TEST(BbrModel, StaleMinimumPersistsForTheWindow) {
  BbrModel m;
  m.on_rtt_sample(40 * kMs, 1 * kUsPerSec);
  for (SimTime t = 2 * kUsPerSec; t <= 10900 * kMs; t += 100 * kMs) {
    m.on_rtt_sample(400 * kMs, t);
    ASSERT_EQ(*m.rtprop(), 40 * kMs) << "at " << t;
  }
  m.on_rtt_sample(400 * kMs, 11 * kUsPerSec);
  EXPECT_EQ(*m.rtprop(), 400 * kMs);
}

TEST(BbrModel, RtpropIsWindowMinimum) {
  BbrModel m;
  m.set_windows(0.5, 8);
  m.on_rtt_sample(400 * kMs, 0);
  EXPECT_EQ(*m.rtprop(), 400 * kMs);

  BbrModel n;
  n.on_rtt_sample(40 * kMs, 0);
  n.on_rtt_sample(50 * kMs, 10 * kMs);
  n.on_rtt_sample(45 * kMs, 20 * kMs);
  EXPECT_EQ(*n.rtprop(), 40 * kMs);
}

TEST(BbrModel, BtlbwIsWindowMaximumInRounds) {
  BbrModel m;
  m.on_delivery_sample(10e6, 1);
  m.on_delivery_sample(20e6, 2);
  m.on_delivery_sample(5e6, 3);
  EXPECT_EQ(*m.btlbw(), 20e6);
  m.set_windows(10, 1);
  m.on_delivery_sample(5e6, 3);
  EXPECT_EQ(*m.btlbw(), 5e6);
}

TEST(BbrModel, ShrinkingRtWindowDropsStaleEntryOnNextSample) {
  BbrModel m;
  m.on_rtt_sample(40 * kMs, 0);
  m.set_windows(1.0, 8);
  m.on_rtt_sample(60 * kMs, 2 * kUsPerSec);
  EXPECT_EQ(*m.rtprop(), 60 * kMs);
}

TEST(BbrModel, InvalidWindowsThrowAndKeepPrevious) {
  BbrModel m;
  m.set_windows(2.0, 4);
  EXPECT_THROW(m.set_windows(-1.0, 8), std::invalid_argument);
  EXPECT_THROW(m.set_windows(0.0, 8), std::invalid_argument);
  EXPECT_THROW(m.set_windows(std::nan(""), 8), std::invalid_argument);
  EXPECT_THROW(m.set_windows(1.0, 0), std::invalid_argument);
  EXPECT_DOUBLE_EQ(m.rtprop_window_s(), 2.0);
  EXPECT_EQ(m.btlbw_window_rounds(), 4u);
}

TEST(BbrModel, ControlOutputsFromEstimates) {
  BbrModel m;
  drive_to_probe_bw(m);
  ASSERT_EQ(m.phase(), Phase::kProbeBw);
  EXPECT_NEAR(m.bdp_bytes(), 100'000, 1e-6);
  const auto out = m.control_outputs();
  EXPECT_EQ(out.cwnd_bytes, 200'000);
  EXPECT_DOUBLE_EQ(out.pacing_rate_bps, m.pacing_gain() * 20e6);
}

TEST(BbrModel, PacingFollowsEveryGainInTheCycle) {
  BbrModel m;
  SimTime t = drive_to_probe_bw(m);
  std::set<double> seen;
  for (int k = 0; k < 64; ++k) {
    const double g = m.pacing_gain();
    const double rate = m.control_outputs().pacing_rate_bps;
    if (g == 1.25) {
      EXPECT_DOUBLE_EQ(rate, 25e6);
    }
    if (g == 0.75) {
      EXPECT_DOUBLE_EQ(rate, 15e6);
    }
    seen.insert(g);
    t += 41 * kMs;
    // Inflight at the probing target lets the 1.25 phase end after one RTprop.
    m.on_ack(ack(t, 40 * kMs, 20e6, true, 125'000));
  }
  EXPECT_EQ(seen, (std::set<double>{0.75, 1.0, 1.25}));
}

TEST(BbrModel, ProbeBwNeverStartsInTheDrainPhase) {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    BbrModel m({}, seed);
    drive_to_probe_bw(m);
    ASSERT_EQ(m.phase(), Phase::kProbeBw);
    EXPECT_NE(m.cycle_index(), 1) << "seed " << seed;
    EXPECT_NE(m.pacing_gain(), 0.75);
  }
}

TEST(BbrModel, StartupPlateauOfThreeRoundsEntersDrain) {
  // Oracle: full pipe once three consecutive rounds grow < 25% over the last
  // accepted peak.
  const std::vector<double> rates = {5e6, 10e6, 20e6, 22e6, 24e6, 24.9e6, 26e6};
  auto oracle_round = [&]() {
    double peak = 0;
    int count = 0;
    for (std::size_t r = 0; r < rates.size(); ++r) {
      const double best = *std::max_element(rates.begin(), rates.begin() + static_cast<long>(r) + 1);
      if (best >= peak * 1.25) {
        peak = best;
        count = 0;
      } else if (++count >= 3) {
        return r;
      }
    }
    return rates.size();
  };
  const std::size_t expect = oracle_round();
  ASSERT_EQ(expect, 5u);

  BbrModel m;
  SimTime t = 0;
  for (std::size_t r = 0; r < rates.size(); ++r) {
    t += 40 * kMs;
    m.on_ack(ack(t, 40 * kMs, rates[r], true, 1'000'000));
    if (r < expect) {
      EXPECT_EQ(m.phase(), Phase::kStartup) << "round " << r;
    } else {
      EXPECT_EQ(m.phase(), Phase::kDrain) << "round " << r;
      break;
    }
  }
  EXPECT_NEAR(m.pacing_gain(), bbr::kDrainGain, 1e-12);
}

TEST(BbrModel, ExpiredRtpropTriggersProbeRttForTwoHundredMs) {
  bbr::BbrConfig cfg;
  cfg.rtprop_window_s = 1.0;
  BbrModel m(cfg, 7);
  SimTime t = drive_to_probe_bw(m);
  // RTT above the stored minimum: no refresh, so the estimate expires.
  SimTime entered = -1;
  int tick = 0;
  while (t < 5 * kUsPerSec && entered < 0) {
    t += 10 * kMs;
    m.on_ack(ack(t, 50 * kMs, 20e6, ++tick % 5 == 0, 150'000));
    if (m.phase() == Phase::kProbeRtt) entered = t;
  }
  ASSERT_GT(entered, 0);
  EXPECT_GT(entered, 1 * kUsPerSec);
  EXPECT_EQ(m.control_outputs().cwnd_bytes, 4 * kMss);

  // Drained pipe from now on; leave time must be >= 200 ms and a round later.
  SimTime drained = -1, left = -1;
  std::uint64_t round_at_drain = 0;
  while (t < entered + 2 * kUsPerSec) {
    t += 10 * kMs;
    const bool rs = ++tick % 5 == 0;
    m.on_ack(ack(t, 41 * kMs, 20e6, rs, 3 * kMss));
    if (drained < 0) {
      drained = t;
      round_at_drain = m.round_count();
    }
    if (m.phase() != Phase::kProbeRtt) {
      left = t;
      break;
    }
  }
  ASSERT_GT(left, 0);
  EXPECT_GE(left - drained, 200 * kMs);
  EXPECT_GT(m.round_count(), round_at_drain);
  EXPECT_EQ(m.phase(), Phase::kProbeBw);
}

TEST(BbrModel, IdenticalWindowWriteChangesNothing) {
  bbrtune::check::Gen g(5);
  BbrModel a({}, 3), b({}, 3);
  SimTime t = 0;
  for (int k = 0; k < 2000; ++k) {
    t += g.integer(1, 20) * kMs;
    const auto s = ack(t, g.integer(30, 90) * kMs, g.uniform(1e6, 2e7), g.coin(0.2), g.integer(0, 300'000));
    a.on_ack(s);
    b.on_ack(s);
    if (k % 100 == 0) b.set_windows(10.0, 8);
    ASSERT_EQ(a.phase(), b.phase());
    ASSERT_EQ(a.rtprop(), b.rtprop());
    ASSERT_EQ(a.btlbw(), b.btlbw());
    ASSERT_EQ(a.control_outputs().cwnd_bytes, b.control_outputs().cwnd_bytes);
  }
}
