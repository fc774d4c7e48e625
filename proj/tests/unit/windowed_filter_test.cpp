#include <gtest/gtest.h>

#include "bbrtune/bbr/windowed_filter.hpp"
#include "gen.hpp"
#include "oracles.hpp"

using namespace bbrtune;
using bbr::WindowedMaxFilter;
using bbr::WindowedMinFilter;
using check::BruteWindow;
using check::Gen;

TEST(WindowedFilter, MaxMatchesBruteForceOnRandomSequences) {
  Gen g(101);
  std::size_t bad = 0;
  for (int seq = 0; seq < 500; ++seq)
    bad += check::filter_mismatches<WindowedMaxFilter, double, std::greater<double>>(
        g, 200, [](Gen& r) { return std::round(r.uniform(0, 20)); });
  EXPECT_EQ(bad, 0u);
}

TEST(WindowedFilter, MinMatchesBruteForceOnRandomSequences) {
  Gen g(202);
  std::size_t bad = 0;
  for (int seq = 0; seq < 500; ++seq)
    bad += check::filter_mismatches<WindowedMinFilter, std::int64_t, std::less<std::int64_t>>(
        g, 200, [](Gen& r) { return r.integer(1, 30); });
  EXPECT_EQ(bad, 0u);
}

TEST(WindowedFilter, EmptyQueryIsNullopt) {
  WindowedMaxFilter f(8);
  EXPECT_FALSE(f.query(0).has_value());
  f.insert(1, 5.0);
  EXPECT_FALSE(f.query(9).has_value());
}

TEST(WindowedFilter, RejectsBadWindowAndBackwardStamps) {
  EXPECT_THROW(WindowedMaxFilter(0), std::invalid_argument);
  WindowedMinFilter f(10);
  f.insert(5, 3);
  EXPECT_THROW(f.insert(4, 2), std::invalid_argument);
  EXPECT_THROW(f.set_window(-1), std::invalid_argument);
  EXPECT_EQ(f.window(), 10);
}

TEST(WindowedFilter, OldSampleExpiresAtExactlyOneWindow) {
  // Rounds: 20 Mbps at round 2 is gone by round 11 with an 8-round window.
  WindowedMaxFilter f(8);
  const double rates[] = {0, 0, 20e6, 3e6, 7e6, 6e6, 5e6, 4e6, 3e6, 2e6, 1e6, 1e6};
  BruteWindow<double, std::greater<double>> ref(8);
  for (std::int64_t r = 2; r <= 11; ++r) {
    f.insert(r, rates[r]);
    ref.insert(r, rates[r]);
  }
  double expect = 0;
  for (std::int64_t r = 4; r <= 11; ++r) expect = std::max(expect, rates[r]);
  EXPECT_EQ(f.query(11), expect);
  EXPECT_EQ(ref.query(11), expect);
}

TEST(WindowedFilter, ShrinkThenGrowDoesNotResurrect) {
  WindowedMinFilter f(10);
  f.insert(0, 40);
  f.insert(5, 60);
  f.set_window(3);
  EXPECT_EQ(f.query(6), 60);
  f.set_window(100);
  EXPECT_EQ(f.query(6), 60);
}

TEST(WindowedFilter, LargerWindowNeverWorseOnSameHistory) {
  Gen g(303);
  for (int seq = 0; seq < 200; ++seq) {
    const std::int64_t w1 = g.integer(1, 30), w2 = w1 + g.integer(0, 30);
    WindowedMinFilter small_min(w1), big_min(w2);
    WindowedMaxFilter small_max(w1), big_max(w2);
    std::int64_t now = 0;
    for (int k = 0; k < 200; ++k) {
      now += g.integer(0, 4);
      const std::int64_t v = g.integer(1, 100);
      small_min.insert(now, v);
      big_min.insert(now, v);
      small_max.insert(now, static_cast<double>(v));
      big_max.insert(now, static_cast<double>(v));
      ASSERT_LE(*big_min.query(now), *small_min.query(now));
      ASSERT_GE(*big_max.query(now), *small_max.query(now));
    }
  }
}
