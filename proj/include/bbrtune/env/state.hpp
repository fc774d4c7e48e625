#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "bbrtune/netsim/types.hpp"

namespace bbrtune::env {

inline constexpr std::size_t kNumFeatures = 9;
inline constexpr std::array<const char*, kNumFeatures> kFeatureNames = {
    "delivery_rate", "srtt", "loss_rate", "cwnd", "pacing_rate", "btlbw", "rtprop", "pacing_gain", "cwnd_gain"};

// Raw (unnormalized) per-flow features in kFeatureNames order.
struct FlowRow {
  FlowId flow_id = 0;
  std::array<double, kNumFeatures> f{};
};

inline FlowRow to_row(const netsim::FlowStats& s) {
  FlowRow r;
  r.flow_id = s.flow_id;
  r.f = {s.delivery_rate_bps, s.srtt_us,         s.loss_rate,      s.cwnd_bytes,    s.pacing_rate_bps,
         s.bbr.btlbw_bps,     s.bbr.rtprop_us,   s.bbr.pacing_gain, s.bbr.cwnd_gain};
  return r;
}

struct StateScales {
  double rate_bps = 20e6;
  double rtt_us = 200'000;
  double cwnd_bytes = 500'000;
  double gain = 3.0;

  std::array<double, kNumFeatures> divisors() const {
    return {rate_bps, rtt_us, 1.0, cwnd_bytes, rate_bps * gain, rate_bps, rtt_us, gain, gain};
  }
};

struct StateTable {
  std::size_t rows = 0;
  std::vector<double> data;  // rows x kNumFeatures, row-major
  std::vector<FlowId> flow_ids;

  double at(std::size_t r, std::size_t c) const { return data[r * kNumFeatures + c]; }
};

inline double normalize_feature(double v, double divisor) {
  if (!std::isfinite(v) || !(divisor > 0)) return 0.0;
  return std::clamp(v / divisor, 0.0, 1.0);
}

// Zero-pads to f_max rows, or keeps a seeded uniform sample of f_max flows;
// kept rows are ordered by flow id.
inline StateTable build_state(std::vector<FlowRow> rows, std::size_t f_max, const StateScales& sc,
                              std::mt19937_64& rng) {
  std::sort(rows.begin(), rows.end(), [](const FlowRow& a, const FlowRow& b) { return a.flow_id < b.flow_id; });
  if (rows.size() > f_max) {
    std::vector<std::size_t> idx(rows.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < f_max; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(f_max);
    std::sort(idx.begin(), idx.end());
    std::vector<FlowRow> kept;
    for (std::size_t i : idx) kept.push_back(rows[i]);
    rows = std::move(kept);
  }
  StateTable t;
  t.rows = f_max;
  t.data.assign(f_max * kNumFeatures, 0.0);
  const auto div = sc.divisors();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    t.flow_ids.push_back(rows[r].flow_id);
    for (std::size_t c = 0; c < kNumFeatures; ++c) t.data[r * kNumFeatures + c] = normalize_feature(rows[r].f[c], div[c]);
  }
  return t;
}

// Writes extra rows into zero-padded slots after the populated ones.
inline void fill_padding(StateTable& t, const std::vector<FlowRow>& extra, const StateScales& sc) {
  const auto div = sc.divisors();
  std::size_t r = t.flow_ids.size();
  for (const auto& row : extra) {
    if (r >= t.rows) break;
    for (std::size_t c = 0; c < kNumFeatures; ++c) t.data[r * kNumFeatures + c] = normalize_feature(row.f[c], div[c]);
    ++r;
  }
}

}  // namespace bbrtune::env
