#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string_view>

#include "bbrtune/bbr/windowed_filter.hpp"
#include "bbrtune/units.hpp"

namespace bbrtune::bbr {

enum class Phase : std::uint8_t { kStartup = 0, kDrain = 1, kProbeBw = 2, kProbeRtt = 3 };

inline std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::kStartup: return "startup";
    case Phase::kDrain: return "drain";
    case Phase::kProbeBw: return "probe_bw";
    case Phase::kProbeRtt: return "probe_rtt";
  }
  return "?";
}

inline constexpr double kHighGain = 2.0 / 0.69314718055994530942;  // 2/ln2
inline constexpr double kDrainGain = 1.0 / kHighGain;
inline constexpr std::array<double, 8> kPacingGainCycle = {1.25, 0.75, 1, 1, 1, 1, 1, 1};
inline constexpr int kFullBwRounds = 3;
inline constexpr double kFullBwThreshold = 1.25;

// Static BBR windows: RTprop 10 s, BtlBw 8 rounds.
inline constexpr double kDefaultRtpropWindowSec = 10.0;
inline constexpr std::uint32_t kDefaultBtlbwWindowRounds = 8;

struct BbrConfig {
  double rtprop_window_s = kDefaultRtpropWindowSec;
  std::uint32_t btlbw_window_rounds = kDefaultBtlbwWindowRounds;
  double cwnd_gain = 2.0;
  std::int64_t mss = kMss;
  std::int64_t initial_cwnd = 10 * kMss;
  SimTime probe_rtt_duration = 200 * kUsPerMs;
};

struct ControlOutputs {
  double pacing_rate_bps = 0;
  std::int64_t cwnd_bytes = 0;
};

// Everything the sender learns from one acknowledgement.
struct AckSample {
  SimTime now = 0;
  SimTime rtt = 0;
  std::optional<double> delivery_rate_bps;
  bool round_start = false;
  std::int64_t inflight_bytes = 0;  // before this ACK was processed
  std::int64_t lost_bytes = 0;      // losses noticed since the last ACK
};

// Per-flow BBR v1 state machine. Only the two filter windows are tunable at
// runtime; every gain and transition rule is fixed.
class BbrModel {
 public:
  explicit BbrModel(BbrConfig cfg = {}, std::uint64_t seed = 1)
      : cfg_(cfg),
        btlbw_filter_(cfg.btlbw_window_rounds),
        rtprop_filter_(from_seconds(cfg.rtprop_window_s)),
        rng_(seed) {
    set_windows(cfg.rtprop_window_s, cfg.btlbw_window_rounds);
    pacing_gain_ = kHighGain;
    cwnd_gain_ = kHighGain;
  }

  // Out-of-range values throw and leave the previous windows in place.
  void set_windows(double w_rt_s, std::uint32_t w_bw_rounds) {
    if (!(w_rt_s > 0) || !std::isfinite(w_rt_s)) throw std::invalid_argument("RTprop window must be > 0 s");
    if (w_bw_rounds < 1) throw std::invalid_argument("BtlBw window must be >= 1 round");
    const SimTime w_rt = from_seconds(w_rt_s);
    if (w_rt <= 0) throw std::invalid_argument("RTprop window below 1 us");
    rtprop_filter_.set_window(w_rt);
    btlbw_filter_.set_window(w_bw_rounds);
    cfg_.rtprop_window_s = w_rt_s;
    cfg_.btlbw_window_rounds = w_bw_rounds;
  }

  void on_rtt_sample(SimTime rtt, SimTime now) {
    if (rtt <= 0) throw std::invalid_argument("RTT sample must be positive");
    const SimTime w_rt = rtprop_filter_.window();
    rtprop_expired_ = rtprop_.has_value() && now > rtprop_stamp_ + w_rt;
    if (!rtprop_ || rtt <= *rtprop_ || rtprop_expired_) rtprop_stamp_ = now;
    rtprop_filter_.insert(now, rtt);
    rtprop_ = rtprop_filter_.query(now);
  }

  void on_delivery_sample(double rate_bps, std::uint64_t round) {
    if (!(rate_bps >= 0)) throw std::invalid_argument("delivery rate must be >= 0");
    const auto r = static_cast<std::int64_t>(round);
    btlbw_filter_.insert(r, rate_bps);
    btlbw_ = btlbw_filter_.query(r);
  }

  // Re-evaluates both filters against their current windows.
  void refresh(SimTime now) {
    if (auto v = rtprop_filter_.query(now)) rtprop_ = v;
    if (auto v = btlbw_filter_.query(static_cast<std::int64_t>(round_count_))) btlbw_ = v;
  }

  ControlOutputs control_outputs() const {
    ControlOutputs out;
    if (!btlbw_ || !rtprop_ || *btlbw_ <= 0) {
      const double rtt_s = rtprop_ ? to_seconds(*rtprop_) : 1e-3;
      out.pacing_rate_bps = kHighGain * static_cast<double>(cfg_.initial_cwnd) * 8.0 / rtt_s;
      out.cwnd_bytes = cfg_.initial_cwnd;
      return out;
    }
    out.pacing_rate_bps = pacing_gain_ * *btlbw_;
    if (phase_ == Phase::kProbeRtt) {
      out.cwnd_bytes = min_cwnd();
    } else {
      out.cwnd_bytes = std::max(static_cast<std::int64_t>(cwnd_gain_ * bdp_bytes()), min_cwnd());
    }
    return out;
  }

  void tick_state_machine(SimTime now, std::int64_t inflight, bool round_start, std::int64_t lost = 0) {
    if (round_start) {
      ++round_count_;
      if (!filled_pipe_) check_full_pipe();
    }
    if (phase_ == Phase::kProbeBw) update_cycle_phase(now, inflight, lost);
    if (phase_ == Phase::kStartup && filled_pipe_) {
      phase_ = Phase::kDrain;
      pacing_gain_ = kDrainGain;
      cwnd_gain_ = kHighGain;
    }
    if (phase_ == Phase::kDrain && btlbw_ && rtprop_ && static_cast<double>(inflight) <= bdp_bytes()) {
      enter_probe_bw(now);
    }
    if (rtprop_expired_ && phase_ != Phase::kProbeRtt) enter_probe_rtt();
    rtprop_expired_ = false;
    if (phase_ == Phase::kProbeRtt) handle_probe_rtt(now, inflight);
  }

  // Full per-ACK update in the canonical order: bandwidth, RTprop, then state machine.
  void on_ack(const AckSample& s) {
    const std::uint64_t round = round_count_ + (s.round_start ? 1 : 0);
    if (s.delivery_rate_bps) on_delivery_sample(*s.delivery_rate_bps, round);
    if (s.rtt > 0) on_rtt_sample(s.rtt, s.now);
    tick_state_machine(s.now, s.inflight_bytes, s.round_start, s.lost_bytes);
  }

  std::optional<double> btlbw() const { return btlbw_; }
  std::optional<SimTime> rtprop() const { return rtprop_; }
  double bdp_bytes() const {
    if (!btlbw_ || !rtprop_) return 0.0;
    return *btlbw_ * to_seconds(*rtprop_) / 8.0;
  }
  Phase phase() const { return phase_; }
  double pacing_gain() const { return pacing_gain_; }
  double cwnd_gain() const { return cwnd_gain_; }
  std::uint64_t round_count() const { return round_count_; }
  int cycle_index() const { return cycle_index_; }
  bool filled_pipe() const { return filled_pipe_; }
  double rtprop_window_s() const { return cfg_.rtprop_window_s; }
  std::uint32_t btlbw_window_rounds() const { return cfg_.btlbw_window_rounds; }
  const BbrConfig& config() const { return cfg_; }

 private:
  std::int64_t min_cwnd() const { return 4 * cfg_.mss; }

  void check_full_pipe() {
    if (!btlbw_) return;
    if (*btlbw_ >= full_bw_ * kFullBwThreshold) {
      full_bw_ = *btlbw_;
      full_bw_count_ = 0;
      return;
    }
    if (++full_bw_count_ >= kFullBwRounds) filled_pipe_ = true;
  }

  void enter_probe_bw(SimTime now) {
    phase_ = Phase::kProbeBw;
    cwnd_gain_ = cfg_.cwnd_gain;
    // Random starting phase, never the 0.75 drain phase.
    std::uniform_int_distribution<int> pick(0, 6);
    cycle_index_ = static_cast<int>(kPacingGainCycle.size()) - 1 - pick(rng_);
    advance_cycle_phase(now);
  }

  void advance_cycle_phase(SimTime now) {
    cycle_index_ = (cycle_index_ + 1) % static_cast<int>(kPacingGainCycle.size());
    cycle_stamp_ = now;
    pacing_gain_ = kPacingGainCycle[static_cast<std::size_t>(cycle_index_)];
  }

  void update_cycle_phase(SimTime now, std::int64_t inflight, std::int64_t lost) {
    const bool full_length = rtprop_ && now - cycle_stamp_ > *rtprop_;
    bool advance = full_length;
    if (pacing_gain_ > 1.0) {
      advance = full_length && (lost > 0 || static_cast<double>(inflight) >= pacing_gain_ * bdp_bytes());
    } else if (pacing_gain_ < 1.0) {
      advance = full_length || static_cast<double>(inflight) <= bdp_bytes();
    }
    if (advance) advance_cycle_phase(now);
  }

  void enter_probe_rtt() {
    phase_ = Phase::kProbeRtt;
    pacing_gain_ = 1.0;
    cwnd_gain_ = 1.0;
    probe_rtt_done_stamp_.reset();
  }

  void handle_probe_rtt(SimTime now, std::int64_t inflight) {
    if (!probe_rtt_done_stamp_) {
      if (inflight <= min_cwnd()) {
        probe_rtt_done_stamp_ = now + cfg_.probe_rtt_duration;
        probe_rtt_round_ = round_count_;
      }
      return;
    }
    if (round_count_ > probe_rtt_round_ && now >= *probe_rtt_done_stamp_) {
      rtprop_stamp_ = now;
      if (filled_pipe_) {
        enter_probe_bw(now);
      } else {
        phase_ = Phase::kStartup;
        pacing_gain_ = kHighGain;
        cwnd_gain_ = kHighGain;
      }
    }
  }

  BbrConfig cfg_;
  WindowedMaxFilter btlbw_filter_;
  WindowedMinFilter rtprop_filter_;
  std::optional<double> btlbw_;
  std::optional<SimTime> rtprop_;
  SimTime rtprop_stamp_ = 0;
  bool rtprop_expired_ = false;

  Phase phase_ = Phase::kStartup;
  double pacing_gain_ = kHighGain;
  double cwnd_gain_ = kHighGain;
  std::uint64_t round_count_ = 0;
  int cycle_index_ = 0;
  SimTime cycle_stamp_ = 0;

  bool filled_pipe_ = false;
  double full_bw_ = 0;
  int full_bw_count_ = 0;

  std::optional<SimTime> probe_rtt_done_stamp_;
  std::uint64_t probe_rtt_round_ = 0;

  std::mt19937_64 rng_;
};

}  // namespace bbrtune::bbr
