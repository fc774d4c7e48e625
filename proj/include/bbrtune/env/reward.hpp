#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "bbrtune/agents/filters.hpp"

namespace bbrtune::env {

struct RewardConfig {
  double alpha = 0.5;
  double normalizer_bps = 20e6;
  double scale_per_ms = 0.05;  // sigmoid input = scale * |error| in ms
  bool double_sigmoid = false; // maps the zero-error value 0.5 to 1
  double kp = 0, kd = 0, ki = 0;
  std::size_t ma_window = 5;

  void validate() const {
    if (!(alpha >= 0 && alpha <= 1)) throw std::invalid_argument("alpha must be in [0,1]");
    if (!(normalizer_bps > 0)) throw std::invalid_argument("throughput normalizer must be > 0");
    if (!(scale_per_ms >= 0)) throw std::invalid_argument("sigmoid scale must be >= 0");
    if (ma_window < 1) throw std::invalid_argument("moving window must be >= 1");
  }
  bool pid_enabled() const { return kp != 0 || kd != 0 || ki != 0; }
};

// Aggregates over one tuning interval.
struct IntervalStats {
  std::size_t samples = 0;
  double mean_throughput_bps = 0;
  double mean_abs_error_us = 0;  // |RTprop estimate - true min RTT|
};

struct RewardValue {
  double value = 0;
  bool no_data = false;
};

inline double latency_term(double abs_error_us, const RewardConfig& cfg) {
  const double s = 1.0 / (1.0 + std::exp(cfg.scale_per_ms * abs_error_us / 1000.0));
  return cfg.double_sigmoid ? 2.0 * s : s;
}

inline RewardValue compute_reward(const IntervalStats& st, const RewardConfig& cfg) {
  if (st.samples == 0) return {0.0, true};
  const double thr = st.mean_throughput_bps / cfg.normalizer_bps;
  return {cfg.alpha * thr + (1.0 - cfg.alpha) * latency_term(st.mean_abs_error_us, cfg), false};
}

// One monitor tick: seconds for times, bits/s for rate.
struct PidSample {
  double throughput_bps = 0;
  double rtt_s = 0;
  double latency_s = 0;           // ground truth
  double latency_estimate_s = 0;  // RTprop estimate
};

struct PidTerms {
  double p = 0, d = 0, i = 0;
  double sum() const { return p + d + i; }
};

inline double least_squares_slope(const std::vector<double>& t, const std::vector<double>& y) {
  const std::size_t n = t.size();
  if (n < 2) return 0.0;
  double mt = 0, my = 0;
  for (std::size_t k = 0; k < n; ++k) {
    mt += t[k];
    my += y[k];
  }
  mt /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double num = 0, den = 0;
  for (std::size_t k = 0; k < n; ++k) {
    num += (t[k] - mt) * (y[k] - my);
    den += (t[k] - mt) * (t[k] - mt);
  }
  return den > 0 ? num / den : 0.0;
}

// P = K_P * normalized throughput / latency; D = K_D * slope of the smoothed
// RTT over full moving windows; I = K_I * sum (estimate - latency) dt.
inline PidTerms pid_terms(const std::vector<PidSample>& series, double dt_s, const RewardConfig& cfg) {
  PidTerms out;
  if (series.empty()) return out;
  double thr = 0, lat = 0;
  std::vector<double> rtt;
  for (const auto& s : series) {
    thr += s.throughput_bps;
    lat += s.latency_s;
    rtt.push_back(s.rtt_s);
    out.i += (s.latency_estimate_s - s.latency_s) * dt_s;
  }
  thr /= static_cast<double>(series.size());
  lat /= static_cast<double>(series.size());
  if (cfg.kp != 0) {
    if (!(lat > 0)) throw std::domain_error("P term undefined for zero latency");
    out.p = cfg.kp * (thr / cfg.normalizer_bps) / lat;
  }
  const auto sm = agents::moving_average(rtt, cfg.ma_window);
  std::vector<double> ts, ys;
  for (std::size_t k = cfg.ma_window - 1; k < sm.size(); ++k) {
    ts.push_back(static_cast<double>(k) * dt_s);
    ys.push_back(sm[k]);
  }
  out.d = cfg.kd * least_squares_slope(ts, ys);
  out.i *= cfg.ki;
  return out;
}

}  // namespace bbrtune::env
