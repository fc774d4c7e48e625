#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

#include "bbrtune/bbr/bbr_model.hpp"
#include "bbrtune/units.hpp"

namespace bbrtune::netsim {

struct LinkSpec {
  double capacity_bps = 20e6;
  SimTime prop_delay_us = 20 * kUsPerMs;  // one way
  std::int64_t buffer_bytes = 200'000;

  void validate() const {
    if (!(capacity_bps > 0)) throw std::invalid_argument("link capacity must be > 0");
    if (prop_delay_us < 0) throw std::invalid_argument("propagation delay must be >= 0");
    if (buffer_bytes < kMss) throw std::invalid_argument("buffer must hold at least one MSS");
  }
  SimTime base_rtt_us() const { return 2 * prop_delay_us; }
  double bdp_bytes() const { return capacity_bps * to_seconds(base_rtt_us()) / 8.0; }
};

// Buffer sized to twice the bandwidth-delay product, floored at 4 packets.
inline std::int64_t default_buffer_bytes(double capacity_bps, SimTime base_rtt_us) {
  const double bdp = capacity_bps * to_seconds(base_rtt_us) / 8.0;
  return std::max<std::int64_t>(static_cast<std::int64_t>(2.0 * bdp), 4 * kMss);
}

struct SetBandwidth {
  double bps;
};
// Sets the base round-trip propagation delay; packets sent afterwards see it.
struct SetLatency {
  SimTime rtt_us;
};
struct FlowJoin {
  FlowId flow;
};
struct FlowLeave {
  FlowId flow;
};

using EventKind = std::variant<SetBandwidth, SetLatency, FlowJoin, FlowLeave>;

struct NetworkEvent {
  SimTime at = 0;
  EventKind kind;
};

inline std::string describe(const EventKind& k) {
  struct V {
    std::string operator()(const SetBandwidth& e) const { return "set_bandwidth " + std::to_string(e.bps); }
    std::string operator()(const SetLatency& e) const { return "set_latency " + std::to_string(e.rtt_us); }
    std::string operator()(const FlowJoin& e) const { return "flow_join " + std::to_string(e.flow); }
    std::string operator()(const FlowLeave& e) const { return "flow_leave " + std::to_string(e.flow); }
  };
  return std::visit(V{}, k);
}

struct Packet {
  FlowId flow_id = 0;
  std::int64_t seq = 0;
  std::int64_t size = kMss;
  SimTime sent_at = 0;
  // Time the sender learns of delivery (ACK arrival).
  std::optional<SimTime> delivered_at;
  // One-way propagation delay in effect when the packet was sent.
  SimTime prop_delay_us = 0;
  // Delivery-rate sampling snapshot taken at send time.
  std::int64_t delivered_at_send = 0;
  SimTime delivered_time_at_send = 0;
  SimTime first_sent_time_at_send = 0;
};

struct QueueState {
  std::int64_t backlog = 0;
  std::int64_t drops = 0;
  // Time the link finishes serving everything currently queued.
  SimTime head_departure = 0;
};

// Pure admission rule of the drop-tail bottleneck for a constant capacity.
// Returns the departure time, or nullopt if the packet is dropped.
inline std::optional<double> bottleneck_transit(const Packet& pkt, const QueueState& q, const LinkSpec& link,
                                                SimTime now) {
  if (q.backlog + pkt.size > link.buffer_bytes) return std::nullopt;
  const double start = static_cast<double>(std::max(now, q.head_departure));
  return start + serialization_us(pkt.size, link.capacity_bps);
}

struct BbrSnapshot {
  double btlbw_bps = 0;
  double rtprop_us = 0;
  double pacing_gain = 0;
  double cwnd_gain = 0;
  bbr::Phase phase = bbr::Phase::kStartup;
  double rtprop_window_s = 0;
  std::uint32_t btlbw_window_rounds = 0;
};

struct FlowStats {
  FlowId flow_id = 0;
  double delivery_rate_bps = 0;
  double srtt_us = 0;
  double min_rtt_observed_us = 0;
  double loss_rate = 0;
  double cwnd_bytes = 0;
  double pacing_rate_bps = 0;
  SimTime sample_window_us = 0;
  // False when no packet was acknowledged in the window; rate/RTT fields are then zero.
  bool has_data = false;
  BbrSnapshot bbr;
  // Ground truth: smallest RTT a full-size packet can see on the current path.
  double true_min_rtt_us = 0;
};

}  // namespace bbrtune::netsim
