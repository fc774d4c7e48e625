#pragma once

#include <random>
#include <vector>

#include "bbrtune/agents/host_agent.hpp"
#include "bbrtune/harness/scenario.hpp"

namespace bbrtune::env {

struct Observation {
  StateTable table;
  std::vector<double> state;
  double reward = 0;
  bool no_data = false;
  PidTerms pid;
};

// Turns a host report into (s_t, r_t). `extra` rows fill padding slots.
inline Observation observe(const agents::StatsReport& rep, const harness::EnvSection& cfg, std::mt19937_64& rng,
                           const std::vector<FlowRow>* extra = nullptr) {
  Observation o;
  o.table = build_state(rep.rows, cfg.f_max, cfg.scales, rng);
  if (extra) fill_padding(o.table, *extra, cfg.scales);
  o.state = o.table.data;
  const auto r = compute_reward(rep.interval, cfg.reward);
  o.reward = r.value;
  o.no_data = r.no_data;
  if (cfg.reward.pid_enabled() && !rep.series.empty()) {
    o.pid = pid_terms(rep.series, cfg.t1_ms / 1000.0, cfg.reward);
    o.reward += o.pid.sum();
  }
  return o;
}

}  // namespace bbrtune::env
