#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "bbrtune/agents/filters.hpp"
#include "bbrtune/env/action.hpp"
#include "bbrtune/env/reward.hpp"
#include "bbrtune/env/state.hpp"
#include "bbrtune/netsim/simulator.hpp"

namespace bbrtune::agents {

struct HostAgentConfig {
  SimTime t1_us = 100 * kUsPerMs;
  SimTime t2_us = 2 * kUsPerSec;
  std::uint32_t agent_id = 0;
  // Flow f belongs to this host when (f - 1) % agent_count == agent_index.
  std::uint32_t agent_index = 0;
  std::uint32_t agent_count = 1;
  RobustnessConfig robust;

  void validate() const {
    if (t1_us <= 0 || t2_us <= 0) throw std::invalid_argument("T1 and T2 must be positive");
    if (!(t1_us < t2_us)) throw std::invalid_argument("T1 must be shorter than T2");
    if (agent_count == 0 || agent_index >= agent_count) throw std::invalid_argument("bad agent index");
    robust.validate();
  }
  bool owns(FlowId f) const { return (f - 1) % agent_count == agent_index; }
};

// Everything a host tells its RL agent at the end of a tuning interval.
struct StatsReport {
  std::uint32_t agent_id = 0;
  std::uint64_t epoch = 0;
  SimTime now = 0;
  std::vector<env::FlowRow> rows;  // latest filtered features, by flow id
  env::IntervalStats interval;
  std::vector<env::PidSample> series;  // one entry per accepted tick
  env::Windows windows;
  std::uint32_t rejected = 0;

  bool operator==(const StatsReport& o) const {
    if (rows.size() != o.rows.size() || series.size() != o.series.size()) return false;
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (rows[i].flow_id != o.rows[i].flow_id || rows[i].f != o.rows[i].f) return false;
    for (std::size_t i = 0; i < series.size(); ++i) {
      const auto &a = series[i], &b = o.series[i];
      if (a.throughput_bps != b.throughput_bps || a.rtt_s != b.rtt_s || a.latency_s != b.latency_s ||
          a.latency_estimate_s != b.latency_estimate_s)
        return false;
    }
    return agent_id == o.agent_id && epoch == o.epoch && now == o.now && windows == o.windows &&
           rejected == o.rejected && interval.samples == o.interval.samples &&
           interval.mean_throughput_bps == o.interval.mean_throughput_bps &&
           interval.mean_abs_error_us == o.interval.mean_abs_error_us;
  }
};

struct ApplyResult {
  bool ok = true;
  std::string error;
};

// Host-side monitor and tuner for the flows assigned to one RL agent.
class HostAgent {
 public:
  HostAgent(HostAgentConfig cfg, netsim::Simulator& sim) : cfg_(std::move(cfg)), sim_(&sim) { cfg_.validate(); }

  const HostAgentConfig& config() const { return cfg_; }
  const env::Windows& windows() const { return windows_; }
  const std::vector<std::pair<SimTime, env::Windows>>& apply_log() const { return apply_log_; }
  std::uint32_t rejected_total() const { return rejected_total_; }

  std::vector<FlowId> owned_flows() const {
    std::vector<FlowId> out;
    for (FlowId f : sim_->active_flows())
      if (cfg_.owns(f)) out.push_back(f);
    return out;
  }

  ApplyResult tuner_apply(const env::Windows& w, const env::ActionGrid& grid) {
    const std::uint32_t lo_rt = grid.decode(0, 0).rt_ms, hi_rt = grid.decode(grid.k_rt() - 1, 0).rt_ms;
    if (w.rt_ms < lo_rt || w.rt_ms > hi_rt || w.bw_rounds < grid.bw_rounds.front() ||
        w.bw_rounds > grid.bw_rounds.back())
      return {false, "windows (" + std::to_string(w.rt_ms) + " ms, " + std::to_string(w.bw_rounds) +
                         " rounds) outside the action grid"};
    windows_ = w;
    apply_log_.emplace_back(sim_->now(), w);
    sync_windows();
    return {};
  }

  // One T1 sample of every owned flow, filtered and sanity-checked.
  std::vector<env::FlowRow> monitor_tick() {
    sync_windows();
    const auto flows = owned_flows();
    for (auto it = ema_.begin(); it != ema_.end();) {
      it = std::find(flows.begin(), flows.end(), it->first) == flows.end() ? ema_.erase(it) : std::next(it);
    }
    std::vector<env::FlowRow> accepted;
    const double truth = sim_->true_min_rtt_us();
    double thr = 0, err = 0, srtt = 0, est = 0;
    std::size_t n_err = 0, n_rtt = 0;
    for (FlowId f : flows) {
      const auto s = sim_->sample_flow_stats(f, cfg_.t1_us);
      Measurement m;
      m.capacity_bps = sim_->link().capacity_bps;
      m.rate_bps = s.delivery_rate_bps;
      if (s.has_data) m.rtt_us = s.srtt_us;
      if (!sanity_check(m, std::nullopt, std::nullopt, cfg_.robust).accept) {
        ++rejected_;
        ++rejected_total_;
        continue;
      }
      auto& e = ema_.try_emplace(f, cfg_.robust.ema_alpha).first->second;
      auto row = env::to_row(s);
      row.f[0] = e.rate.update(s.delivery_rate_bps);
      row.f[1] = s.has_data ? e.srtt.update(s.srtt_us) : e.srtt.value().value_or(0.0);
      row.f[2] = e.loss.update(s.loss_rate);
      latest_[f] = row;
      accepted.push_back(row);
      thr += row.f[0];
      if (s.bbr.rtprop_us > 0) {
        err += std::abs(s.bbr.rtprop_us - truth);
        est += s.bbr.rtprop_us;
        ++n_err;
      }
      if (row.f[1] > 0) {
        srtt += row.f[1];
        ++n_rtt;
      }
    }
    if (!accepted.empty()) {
      ++ticks_;
      thr_sum_ += thr;
      if (n_err) {
        err_sum_ += err / static_cast<double>(n_err);
        ++err_ticks_;
      }
      env::PidSample p;
      p.throughput_bps = thr;
      p.rtt_s = n_rtt ? srtt / static_cast<double>(n_rtt) * 1e-6 : 0.0;
      p.latency_s = truth * 1e-6;
      p.latency_estimate_s = n_err ? est / static_cast<double>(n_err) * 1e-6 : 0.0;
      series_.push_back(p);
    }
    return accepted;
  }

  // Closes the interval: per-flow latest rows plus interval aggregates.
  StatsReport report() {
    StatsReport r;
    r.agent_id = cfg_.agent_id;
    r.epoch = epoch_++;
    r.now = sim_->now();
    const auto flows = owned_flows();
    for (FlowId f : flows) {
      auto it = latest_.find(f);
      if (it != latest_.end()) r.rows.push_back(it->second);
    }
    for (auto it = latest_.begin(); it != latest_.end();)
      it = std::find(flows.begin(), flows.end(), it->first) == flows.end() ? latest_.erase(it) : std::next(it);
    r.interval.samples = ticks_;
    if (ticks_) r.interval.mean_throughput_bps = thr_sum_ / static_cast<double>(ticks_);
    if (err_ticks_) r.interval.mean_abs_error_us = err_sum_ / static_cast<double>(err_ticks_);
    r.series = std::move(series_);
    r.windows = windows_;
    r.rejected = rejected_;
    series_.clear();
    ticks_ = err_ticks_ = 0;
    thr_sum_ = err_sum_ = 0;
    rejected_ = 0;
    return r;
  }

 private:
  struct FlowFilters {
    explicit FlowFilters(double a) : rate(a), srtt(a), loss(a) {}
    Ema rate, srtt, loss;
  };

  void sync_windows() {
    for (FlowId f : owned_flows()) {
      auto& m = sim_->bbr(f);
      if (m.btlbw_window_rounds() != windows_.bw_rounds ||
          from_seconds(m.rtprop_window_s()) != from_seconds(windows_.rt_seconds()))
        m.set_windows(windows_.rt_seconds(), windows_.bw_rounds);
    }
  }

  HostAgentConfig cfg_;
  netsim::Simulator* sim_;
  env::Windows windows_ = env::kVanillaWindows;
  std::vector<std::pair<SimTime, env::Windows>> apply_log_;
  std::map<FlowId, FlowFilters> ema_;
  std::map<FlowId, env::FlowRow> latest_;
  std::vector<env::PidSample> series_;
  std::size_t ticks_ = 0, err_ticks_ = 0;
  double thr_sum_ = 0, err_sum_ = 0;
  std::uint32_t rejected_ = 0, rejected_total_ = 0;
  std::uint64_t epoch_ = 0;
};

}  // namespace bbrtune::agents
