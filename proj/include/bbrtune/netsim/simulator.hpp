#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "bbrtune/bbr/bbr_model.hpp"
#include "bbrtune/netsim/trace.hpp"
#include "bbrtune/netsim/types.hpp"

namespace bbrtune::netsim {

struct SimConfig {
  LinkSpec link;
  std::uint64_t seed = 1;
  bbr::BbrConfig bbr;
  bool record_trace = true;
  SimTime trace_interval_us = 100 * kUsPerMs;
  // How far back per-flow ACK/send/drop history is kept for sampling.
  SimTime stats_horizon_us = 10 * kUsPerSec;
};

struct FlowCounters {
  std::int64_t bytes_sent = 0;
  std::int64_t bytes_delivered = 0;  // acknowledged
  std::int64_t bytes_dropped = 0;    // dropped at the bottleneck
  std::int64_t inflight = 0;         // sender view: sent - acked - loss-notified
};

struct TransmitInfo {
  SimTime now;
  FlowId flow;
  std::int64_t inflight_after;
  std::int64_t cwnd;
};

// Packet-level discrete-event model of a dumbbell: N BBR senders share one
// drop-tail FIFO bottleneck; the ACK path adds delay only. Single-threaded;
// (seed, scheduled events) fully determine every output.
class Simulator {
 public:
  explicit Simulator(SimConfig cfg) : cfg_(std::move(cfg)), link_(cfg_.link), rng_(cfg_.seed) {
    link_.validate();
    if (cfg_.trace_interval_us <= 0) throw std::invalid_argument("trace interval must be positive");
    next_trace_ = cfg_.trace_interval_us;
  }

  SimTime now() const { return now_; }
  const LinkSpec& link() const { return link_; }
  const SimConfig& config() const { return cfg_; }

  void schedule(const NetworkEvent& ev) {
    if (ev.at < now_) throw std::invalid_argument("cannot schedule event in the past: " + describe(ev.kind));
    network_events_.push_back(ev);
    push_event(Event{ev.at, 0, EvType::kNetwork, 0, 0, network_events_.size() - 1, {}});
  }

  // Processes everything up to t_end and returns the trace rows recorded on the way.
  TraceLog run_until(SimTime t_end) {
    const std::size_t first = trace_.rows.size();
    advance_to(t_end);
    TraceLog out;
    out.rows.assign(trace_.rows.begin() + static_cast<std::ptrdiff_t>(first), trace_.rows.end());
    return out;
  }

  void advance_to(SimTime t_end) {
    if (t_end < now_) throw std::invalid_argument("run_until target is in the past");
    constexpr SimTime kNever = std::numeric_limits<SimTime>::max();
    for (;;) {
      const SimTime next_ev = heap_.empty() ? kNever : heap_.front().at;
      const SimTime next_tr = cfg_.record_trace ? next_trace_ : kNever;
      if (std::min(next_ev, next_tr) > t_end) break;
      if (next_ev <= next_tr) {
        std::pop_heap(heap_.begin(), heap_.end(), EventLater{});
        Event ev = std::move(heap_.back());
        heap_.pop_back();
        now_ = ev.at;
        dispatch(ev);
      } else {
        now_ = next_tr;
        record_trace_sample();
        next_trace_ += cfg_.trace_interval_us;
      }
    }
    now_ = t_end;
  }

  const TraceLog& trace() const { return trace_; }

  FlowStats sample_flow_stats(FlowId id, SimTime window) const {
    const FlowState& f = flow(id);
    if (window <= 0 || window > cfg_.stats_horizon_us) throw std::invalid_argument("sample window out of range");
    FlowStats s;
    s.flow_id = id;
    s.sample_window_us = window;
    const auto ctl = f.bbr.control_outputs();
    s.cwnd_bytes = static_cast<double>(ctl.cwnd_bytes);
    s.pacing_rate_bps = ctl.pacing_rate_bps;
    s.bbr = snapshot(f.bbr);
    s.true_min_rtt_us = true_min_rtt_us();

    const SimTime from = now_ - window;
    auto ack_it = std::upper_bound(f.acks.begin(), f.acks.end(), from,
                                   [](SimTime t, const AckRecord& a) { return t < a.time; });
    std::int64_t bytes = 0;
    double srtt = 0;
    SimTime min_rtt = 0;
    bool first = true;
    for (auto it = ack_it; it != f.acks.end(); ++it) {
      bytes += it->bytes;
      const auto rtt = static_cast<double>(it->rtt);
      if (first) {
        srtt = rtt;
        min_rtt = it->rtt;
        first = false;
      } else {
        srtt += (rtt - srtt) / 8.0;
        min_rtt = std::min(min_rtt, it->rtt);
      }
    }
    const auto sends = static_cast<std::int64_t>(
        f.sends.end() - std::upper_bound(f.sends.begin(), f.sends.end(), from));
    const auto drops = static_cast<std::int64_t>(
        f.drops.end() - std::upper_bound(f.drops.begin(), f.drops.end(), from));
    s.loss_rate = sends > 0 ? std::min(1.0, static_cast<double>(drops) / static_cast<double>(sends)) : 0.0;
    if (first) return s;  // no ACK in the window
    s.has_data = true;
    s.delivery_rate_bps = std::min(static_cast<double>(bytes) * 8.0 / to_seconds(window), link_.capacity_bps);
    s.srtt_us = srtt;
    s.min_rtt_observed_us = static_cast<double>(min_rtt);
    return s;
  }

  bool has_flow(FlowId id) const { return flows_.count(id) != 0; }
  std::vector<FlowId> active_flows() const {
    std::vector<FlowId> ids;
    ids.reserve(flows_.size());
    for (const auto& [id, f] : flows_) ids.push_back(id);
    return ids;
  }

  bbr::BbrModel& bbr(FlowId id) { return flow(id).bbr; }
  const bbr::BbrModel& bbr(FlowId id) const { return flow(id).bbr; }

  // Applies new filter windows to a live flow; throws on bad values and keeps the old ones.
  void set_windows(FlowId id, double w_rt_s, std::uint32_t w_bw_rounds) {
    flow(id).bbr.set_windows(w_rt_s, w_bw_rounds);
  }

  const FlowCounters& counters(FlowId id) const { return flow(id).counters; }

  // Bytes of `id` currently inside the network (queued, on the wire, or on the ACK path).
  std::int64_t network_inflight_bytes(FlowId id) const {
    const FlowState& f = flow(id);
    std::int64_t total = 0;
    for (const auto& p : queue_)
      if (p.flow_id == id && p.incarnation == f.incarnation) total += p.pkt.size;
    for (const auto& ev : heap_)
      if (ev.type == EvType::kAck && ev.flow == id && ev.incarnation == f.incarnation) total += ev.pkt.size;
    return total;
  }

  QueueState queue_state() const {
    return QueueState{backlog_, drops_, static_cast<SimTime>(std::ceil(link_free_at_))};
  }

  // Smallest RTT a full-size packet can experience on the current path.
  double true_min_rtt_us() const {
    return static_cast<double>(link_.base_rtt_us()) + serialization_us(kMss, link_.capacity_bps);
  }

  const std::vector<std::string>& warnings() const { return warnings_; }

  void set_transmit_observer(std::function<void(const TransmitInfo&)> fn) { on_transmit_ = std::move(fn); }

  static BbrSnapshot snapshot(const bbr::BbrModel& m) {
    BbrSnapshot b;
    b.btlbw_bps = m.btlbw().value_or(0.0);
    b.rtprop_us = m.rtprop() ? static_cast<double>(*m.rtprop()) : 0.0;
    b.pacing_gain = m.pacing_gain();
    b.cwnd_gain = m.cwnd_gain();
    b.phase = m.phase();
    b.rtprop_window_s = m.rtprop_window_s();
    b.btlbw_window_rounds = m.btlbw_window_rounds();
    return b;
  }

 private:
  enum class EvType : std::uint8_t { kNetwork, kSendTimer, kDeparture, kAck, kLossNotify };

  struct Event {
    SimTime at;
    std::uint64_t seq;
    EvType type;
    FlowId flow;
    std::uint32_t incarnation;
    std::size_t index;  // network event index
    Packet pkt;
  };
  struct EventLater {
    bool operator()(const Event& a, const Event& b) const {
      return a.at != b.at ? a.at > b.at : a.seq > b.seq;
    }
  };

  struct AckRecord {
    SimTime time;
    std::int64_t bytes;
    SimTime rtt;
  };

  struct FlowState {
    FlowId id = 0;
    std::uint32_t incarnation = 0;
    bbr::BbrModel bbr;
    FlowCounters counters;
    std::int64_t next_seq = 0;
    // Delivery-rate sampling state.
    std::int64_t delivered = 0;
    SimTime delivered_time = 0;
    SimTime first_sent_time = 0;
    std::int64_t prior_delivered = 0;
    std::int64_t next_round_delivered = 0;
    std::int64_t lost_since_ack = 0;
    // Pacing.
    double next_send_exact = 0;
    SimTime timer_at = -1;
    // Sampling history.
    std::deque<AckRecord> acks;
    std::deque<SimTime> sends;
    std::deque<SimTime> drops;
  };

  struct Queued {
    FlowId flow_id;
    std::uint32_t incarnation;
    Packet pkt;
  };

  FlowState& flow(FlowId id) {
    auto it = flows_.find(id);
    if (it == flows_.end()) throw std::out_of_range("unknown flow " + std::to_string(id));
    return *it->second;
  }
  const FlowState& flow(FlowId id) const {
    auto it = flows_.find(id);
    if (it == flows_.end()) throw std::out_of_range("unknown flow " + std::to_string(id));
    return *it->second;
  }

  void push_event(Event ev) {
    ev.seq = next_seq_++;
    heap_.push_back(std::move(ev));
    std::push_heap(heap_.begin(), heap_.end(), EventLater{});
  }

  void warn(std::string msg) { warnings_.push_back("t=" + std::to_string(now_) + "us " + std::move(msg)); }

  template <typename T>
  void prune(std::deque<T>& d, auto time_of) {
    const SimTime cutoff = now_ - cfg_.stats_horizon_us;
    while (!d.empty() && time_of(d.front()) <= cutoff) d.pop_front();
  }

  void dispatch(Event& ev) {
    switch (ev.type) {
      case EvType::kNetwork: apply_network_event(network_events_[ev.index]); break;
      case EvType::kSendTimer: on_send_timer(ev); break;
      case EvType::kDeparture: on_departure(); break;
      case EvType::kAck: on_ack(ev); break;
      case EvType::kLossNotify: on_loss_notify(ev); break;
    }
  }

  void apply_network_event(const NetworkEvent& ne) {
    struct Visitor {
      Simulator& sim;
      void operator()(const SetBandwidth& e) const {
        LinkSpec next = sim.link_;
        next.capacity_bps = e.bps;
        next.validate();
        sim.link_ = next;
      }
      void operator()(const SetLatency& e) const {
        if (e.rtt_us < 0) throw std::invalid_argument("negative latency");
        sim.link_.prop_delay_us = e.rtt_us / 2;
      }
      void operator()(const FlowJoin& e) const { sim.join_flow(e.flow); }
      void operator()(const FlowLeave& e) const { sim.leave_flow(e.flow); }
    };
    std::visit(Visitor{*this}, ne.kind);
  }

  void join_flow(FlowId id) {
    if (flows_.count(id)) {
      warn("flow " + std::to_string(id) + " already active; join ignored");
      return;
    }
    auto f = std::make_unique<FlowState>();
    f->id = id;
    f->incarnation = ++incarnations_[id];
    f->bbr = bbr::BbrModel(cfg_.bbr, rng_());
    FlowState& ref = *f;
    flows_.emplace(id, std::move(f));
    try_send(ref);
  }

  void leave_flow(FlowId id) {
    if (!flows_.erase(id)) warn("flow " + std::to_string(id) + " not active; leave ignored");
  }

  FlowState* live_flow(FlowId id, std::uint32_t incarnation) {
    auto it = flows_.find(id);
    if (it == flows_.end() || it->second->incarnation != incarnation) return nullptr;
    return it->second.get();
  }

  void try_send(FlowState& f) {
    for (;;) {
      const auto ctl = f.bbr.control_outputs();
      if (f.counters.inflight + kMss > ctl.cwnd_bytes) return;
      const auto due = static_cast<SimTime>(std::ceil(f.next_send_exact));
      if (now_ < due) {
        if (f.timer_at != due) {
          f.timer_at = due;
          push_event(Event{due, 0, EvType::kSendTimer, f.id, f.incarnation, 0, {}});
        }
        return;
      }
      transmit(f, ctl);
    }
  }

  void transmit(FlowState& f, const bbr::ControlOutputs& ctl) {
    Packet p;
    p.flow_id = f.id;
    p.seq = f.next_seq;
    p.size = kMss;
    p.sent_at = now_;
    p.prop_delay_us = link_.prop_delay_us;
    if (f.counters.inflight == 0) {
      f.first_sent_time = now_;
      f.delivered_time = now_;
    }
    p.delivered_at_send = f.delivered;
    p.delivered_time_at_send = f.delivered_time;
    p.first_sent_time_at_send = f.first_sent_time;
    f.next_seq += p.size;

    const double gap = serialization_us(p.size, ctl.pacing_rate_bps);
    const double base = (static_cast<double>(now_) - f.next_send_exact <= 1.0) ? f.next_send_exact
                                                                               : static_cast<double>(now_);
    f.next_send_exact = base + gap;

    f.counters.bytes_sent += p.size;
    f.counters.inflight += p.size;
    f.sends.push_back(now_);
    prune(f.sends, [](SimTime t) { return t; });
    if (on_transmit_) on_transmit_(TransmitInfo{now_, f.id, f.counters.inflight, ctl.cwnd_bytes});
    enqueue_at_bottleneck(f, std::move(p));
  }

  void enqueue_at_bottleneck(FlowState& f, Packet p) {
    const QueueState q = queue_state();
    if (!bottleneck_transit(p, q, link_, now_)) {
      ++drops_;
      f.counters.bytes_dropped += p.size;
      f.drops.push_back(now_);
      prune(f.drops, [](SimTime t) { return t; });
      const SimTime notify = now_ + 2 * p.prop_delay_us;
      push_event(Event{notify, 0, EvType::kLossNotify, f.id, f.incarnation, 0, std::move(p)});
      return;
    }
    backlog_ += p.size;
    const bool idle = queue_.empty();
    queue_.push_back(Queued{f.id, f.incarnation, std::move(p)});
    if (idle) start_service(false);
  }

  // Back-to-back packets start exactly when the previous one finished.
  void start_service(bool back_to_back) {
    const Packet& head = queue_.front().pkt;
    const double start = back_to_back ? link_free_at_ : std::max(static_cast<double>(now_), link_free_at_);
    link_free_at_ = start + serialization_us(head.size, link_.capacity_bps);
    push_event(Event{static_cast<SimTime>(std::ceil(link_free_at_)), 0, EvType::kDeparture, 0, 0, 0, {}});
  }

  void on_departure() {
    Queued q = std::move(queue_.front());
    queue_.pop_front();
    backlog_ -= q.pkt.size;
    const SimTime ack_at = now_ + 2 * q.pkt.prop_delay_us;
    push_event(Event{ack_at, 0, EvType::kAck, q.flow_id, q.incarnation, 0, std::move(q.pkt)});
    if (!queue_.empty()) start_service(true);
  }

  void on_send_timer(const Event& ev) {
    FlowState* f = live_flow(ev.flow, ev.incarnation);
    if (!f || f->timer_at != ev.at) return;
    f->timer_at = -1;
    try_send(*f);
  }

  void on_loss_notify(const Event& ev) {
    FlowState* f = live_flow(ev.flow, ev.incarnation);
    if (!f) return;
    f->counters.inflight -= ev.pkt.size;
    f->lost_since_ack += ev.pkt.size;
    try_send(*f);
  }

  void on_ack(Event& ev) {
    FlowState* fp = live_flow(ev.flow, ev.incarnation);
    if (!fp) return;
    FlowState& f = *fp;
    Packet& p = ev.pkt;
    p.delivered_at = now_;
    const std::int64_t prior_inflight = f.counters.inflight;
    f.counters.inflight -= p.size;
    f.counters.bytes_delivered += p.size;

    const SimTime rtt = now_ - p.sent_at;
    f.delivered += p.size;
    f.delivered_time = now_;

    bbr::AckSample s;
    s.now = now_;
    s.rtt = rtt;
    s.inflight_bytes = prior_inflight;
    s.lost_bytes = f.lost_since_ack;
    f.lost_since_ack = 0;
    if (p.delivered_at_send >= f.prior_delivered) {
      f.prior_delivered = p.delivered_at_send;
      const SimTime send_elapsed = p.sent_at - p.first_sent_time_at_send;
      const SimTime ack_elapsed = now_ - p.delivered_time_at_send;
      const SimTime interval = std::max(send_elapsed, ack_elapsed);
      f.first_sent_time = p.sent_at;
      const auto rtprop = f.bbr.rtprop();
      if (interval > 0 && (!rtprop || interval >= *rtprop)) {
        s.delivery_rate_bps =
            static_cast<double>(f.delivered - p.delivered_at_send) * 8.0 / to_seconds(interval);
      }
    }
    if (p.delivered_at_send >= f.next_round_delivered) {
      f.next_round_delivered = f.delivered;
      s.round_start = true;
    }
    f.bbr.on_ack(s);

    f.acks.push_back(AckRecord{now_, p.size, rtt});
    prune(f.acks, [](const AckRecord& a) { return a.time; });
    try_send(f);
  }

  void record_trace_sample() {
    for (const auto& [id, f] : flows_) {
      TraceRow row;
      row.time_us = now_;
      row.stats = sample_flow_stats(id, std::min(cfg_.trace_interval_us, cfg_.stats_horizon_us));
      row.queue_backlog_bytes = backlog_;
      trace_.rows.push_back(row);
    }
  }

  SimConfig cfg_;
  LinkSpec link_;
  std::mt19937_64 rng_;
  SimTime now_ = 0;
  std::uint64_t next_seq_ = 0;
  std::vector<Event> heap_;
  std::vector<NetworkEvent> network_events_;

  std::map<FlowId, std::unique_ptr<FlowState>> flows_;
  std::map<FlowId, std::uint32_t> incarnations_;

  std::deque<Queued> queue_;
  std::int64_t backlog_ = 0;
  std::int64_t drops_ = 0;
  double link_free_at_ = 0;

  TraceLog trace_;
  SimTime next_trace_ = 0;
  std::vector<std::string> warnings_;
  std::function<void(const TransmitInfo&)> on_transmit_;
};

}  // namespace bbrtune::netsim
