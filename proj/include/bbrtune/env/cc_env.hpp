#pragma once

#include <cstdint>
#include <memory>
#include <ostream>
#include <random>
#include <vector>

#include "bbrtune/agents/host_agent.hpp"
#include "bbrtune/env/observe.hpp"
#include "bbrtune/harness/scenario.hpp"
#include "bbrtune/netsim/simulator.hpp"
#include "bbrtune/rl/ppo.hpp"
#include "bbrtune/rng.hpp"

namespace bbrtune::env {

struct EnvStepRecord {
  SimTime time_us = 0;
  Windows windows;
  double reward = 0;
  double mean_throughput_bps = 0;
  double mean_abs_error_us = 0;
  std::size_t samples = 0;
  bool done = false;
};

inline void write_step_records(std::ostream& os, const std::vector<EnvStepRecord>& recs) {
  os << "time_us,w_rt_ms,w_bw_rounds,reward,mean_throughput_bps,mean_abs_error_us,samples,done\n";
  for (const auto& r : recs)
    os << r.time_us << ',' << r.windows.rt_ms << ',' << r.windows.bw_rounds << ',' << fmt_double(r.reward) << ','
       << fmt_double(r.mean_throughput_bps) << ',' << fmt_double(r.mean_abs_error_us) << ',' << r.samples << ','
       << (r.done ? 1 : 0) << '\n';
}

struct CcEnvOptions {
  // Training draws a fresh scenario instance per episode; evaluation replays the spec seed.
  bool vary_seed = true;
  std::uint64_t stream = 0;
  bool record_trace = false;
};

// Seed of the `episode`-th scenario instance seen by actor `stream`.
inline std::uint64_t episode_seed(std::uint64_t base, const CcEnvOptions& o, std::uint64_t episode) {
  return o.vary_seed ? derive_seed(derive_seed(base, o.stream), episode) : base;
}

inline std::unique_ptr<netsim::Simulator> make_simulator(const harness::ScenarioSpec& spec, std::uint64_t seed,
                                                         bool record_trace) {
  const auto mat = harness::materialize(spec, seed);
  netsim::SimConfig sc;
  sc.link = mat.link;
  sc.seed = seed;
  sc.record_trace = record_trace;
  sc.trace_interval_us = spec.t1_us();
  sc.stats_horizon_us = std::max<SimTime>(spec.t2_us(), 10 * kUsPerSec);
  auto sim = std::make_unique<netsim::Simulator>(sc);
  for (const auto& e : mat.events) sim->schedule(e);
  return sim;
}

// One RL step = apply windows, run T2 with a monitor tick every T1, report.
class CcEnv : public rl::Environment {
 public:
  explicit CcEnv(harness::ScenarioSpec spec, CcEnvOptions opt = {})
      : spec_(std::move(spec)), cfg_(harness::resolved_env(spec_)), opt_(opt) {
    harness::validate(spec_);
  }

  std::size_t state_dim() const override { return cfg_.f_max * kNumFeatures; }
  const harness::ScenarioSpec& spec() const { return spec_; }
  const harness::EnvSection& env_config() const { return cfg_; }

  std::vector<double> reset() override {
    seed_ = episode_seed(spec_.seed, opt_, episode_++);
    sim_ = make_simulator(spec_, seed_, opt_.record_trace);
    agents::HostAgentConfig hc;
    hc.t1_us = spec_.t1_us();
    hc.t2_us = spec_.t2_us();
    hc.robust = cfg_.robust;
    host_ = std::make_unique<agents::HostAgent>(hc, *sim_);
    state_rng_.seed(derive_seed(seed_, 0x57A7E));
    records_.clear();
    run_interval();
    return observe(host_->report(), cfg_, state_rng_).state;
  }

  rl::StepResult step(std::size_t i_rt, std::size_t i_bw) override {
    if (!sim_) throw std::logic_error("step() before reset()");
    const Windows w = cfg_.grid.decode(i_rt, i_bw);
    const auto applied = host_->tuner_apply(w, cfg_.grid);
    if (!applied.ok) throw std::invalid_argument(applied.error);
    const bool done = run_interval();
    const auto rep = host_->report();
    const auto obs = observe(rep, cfg_, state_rng_);
    EnvStepRecord rec{sim_->now(), w, obs.reward, rep.interval.mean_throughput_bps, rep.interval.mean_abs_error_us,
                      rep.interval.samples, done};
    records_.push_back(rec);
    return {obs.state, obs.reward, done};
  }

  netsim::Simulator& simulator() { return *sim_; }
  agents::HostAgent& host() { return *host_; }
  const std::vector<EnvStepRecord>& records() const { return records_; }
  std::uint64_t current_seed() const { return seed_; }
  std::uint64_t episodes_started() const { return episode_; }

 private:
  // Advances one T2 (truncated at scenario end); true when the scenario is over.
  bool run_interval() {
    const SimTime end = spec_.duration_us();
    const SimTime stop = std::min(end, sim_->now() + spec_.t2_us());
    while (sim_->now() < stop) {
      sim_->advance_to(std::min(stop, sim_->now() + spec_.t1_us()));
      host_->monitor_tick();
    }
    return sim_->now() >= end;
  }

  harness::ScenarioSpec spec_;
  harness::EnvSection cfg_;
  CcEnvOptions opt_;
  std::uint64_t episode_ = 0;
  std::uint64_t seed_ = 0;
  std::unique_ptr<netsim::Simulator> sim_;
  std::unique_ptr<agents::HostAgent> host_;
  std::mt19937_64 state_rng_;
  std::vector<EnvStepRecord> records_;
};

}  // namespace bbrtune::env
