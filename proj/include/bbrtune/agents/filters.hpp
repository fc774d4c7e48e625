#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bbrtune::agents {

inline std::vector<double> ema_filter(const std::vector<double>& x, double alpha) {
  if (!(alpha > 0 && alpha <= 1)) throw std::invalid_argument("ema alpha must be in (0,1]");
  std::vector<double> y(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) y[t] = t == 0 ? x[0] : alpha * x[t] + (1.0 - alpha) * y[t - 1];
  return y;
}

inline std::vector<double> moving_average(const std::vector<double>& x, std::size_t w) {
  if (w < 1) throw std::invalid_argument("moving average window must be >= 1");
  std::vector<double> y(x.size());
  double sum = 0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    sum += x[t];
    if (t >= w) sum -= x[t - w];
    const std::size_t n = t + 1 < w ? t + 1 : w;
    y[t] = sum / static_cast<double>(n);
  }
  return y;
}

// Stateful single-series EMA used by the monitor between ticks.
class Ema {
 public:
  explicit Ema(double alpha = 0.5) : alpha_(alpha) {
    if (!(alpha > 0 && alpha <= 1)) throw std::invalid_argument("ema alpha must be in (0,1]");
  }
  double update(double x) {
    y_ = y_ ? alpha_ * x + (1.0 - alpha_) * *y_ : x;
    return *y_;
  }
  std::optional<double> value() const { return y_; }

 private:
  double alpha_;
  std::optional<double> y_;
};

struct RobustnessConfig {
  double ema_alpha = 0.5;
  std::size_t ma_window = 5;
  double rtt_min_us = 1;
  double rtt_max_us = 10e6;
  double rate_margin = 1.5;
  double reward_min = -10;
  double reward_max = 10;

  void validate() const {
    if (!(ema_alpha > 0 && ema_alpha <= 1)) throw std::invalid_argument("ema_alpha must be in (0,1]");
    if (ma_window < 1) throw std::invalid_argument("moving window must be >= 1");
    if (!(rtt_min_us < rtt_max_us)) throw std::invalid_argument("rtt bounds must satisfy min < max");
    if (!(rate_margin > 0)) throw std::invalid_argument("rate margin must be > 0");
    if (!(reward_min < reward_max)) throw std::invalid_argument("reward bounds must satisfy min < max");
  }
};

enum class SanityRule { kNone, kRtt, kRate, kReward, kAction };

inline const char* rule_name(SanityRule r) {
  switch (r) {
    case SanityRule::kNone: return "none";
    case SanityRule::kRtt: return "rtt";
    case SanityRule::kRate: return "rate";
    case SanityRule::kReward: return "reward";
    case SanityRule::kAction: return "action";
  }
  return "?";
}

struct SanityVerdict {
  bool accept = true;
  SanityRule rule = SanityRule::kNone;
};

struct Measurement {
  std::optional<double> rtt_us;
  std::optional<double> rate_bps;
  double capacity_bps = 0;
};

struct ActionCheck {
  std::size_t i_rt = 0, i_bw = 0, k_rt = 1, k_bw = 1;
};

// Rejects the (measurement, action, reward) tuple if any part is implausible.
inline SanityVerdict sanity_check(const Measurement& m, const std::optional<ActionCheck>& a,
                                  const std::optional<double>& reward, const RobustnessConfig& cfg) {
  if (m.rtt_us && !(*m.rtt_us >= cfg.rtt_min_us && *m.rtt_us <= cfg.rtt_max_us)) return {false, SanityRule::kRtt};
  if (m.rate_bps && !(*m.rate_bps >= 0 && *m.rate_bps <= m.capacity_bps * cfg.rate_margin))
    return {false, SanityRule::kRate};
  if (reward && !(*reward >= cfg.reward_min && *reward <= cfg.reward_max)) return {false, SanityRule::kReward};
  if (a && (a->i_rt >= a->k_rt || a->i_bw >= a->k_bw)) return {false, SanityRule::kAction};
  return {};
}

}  // namespace bbrtune::agents
