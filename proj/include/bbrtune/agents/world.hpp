#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "bbrtune/agents/channel.hpp"
#include "bbrtune/agents/coop.hpp"
#include "bbrtune/agents/host_agent.hpp"
#include "bbrtune/agents/rl_interface.hpp"
#include "bbrtune/env/cc_env.hpp"
#include "bbrtune/rl/ppo.hpp"

namespace bbrtune::agents {

enum class Transport { kMemory, kTcp };

inline Transport parse_transport(const std::string& s) {
  if (s == "mem") return Transport::kMemory;
  if (s == "tcp") return Transport::kTcp;
  throw std::invalid_argument("transport must be mem or tcp");
}

// One simulator shared by several host/RL agent pairs that talk only through
// encoded frames. Step semantics match env::CcEnv for a single agent.
class World {
 public:
  World(harness::ScenarioSpec spec, env::CcEnvOptions opt, Transport transport = Transport::kMemory)
      : spec_(std::move(spec)),
        cfg_(harness::resolved_env(spec_)),
        opt_(opt),
        transport_(transport),
        neighbors_(neighbor_sets(spec_.agents.count, spec_.agents.topology)) {
    harness::validate(spec_);
  }

  std::size_t agents() const { return spec_.agents.count; }
  std::size_t state_dim() const { return cfg_.f_max * env::kNumFeatures; }
  const std::vector<std::vector<std::size_t>>& neighbors() const { return neighbors_; }

  std::vector<std::vector<double>> reset() {
    seed_ = env::episode_seed(spec_.seed, opt_, episode_++);
    sim_ = env::make_simulator(spec_, seed_, opt_.record_trace);
    slots_.clear();
    for (std::size_t a = 0; a < agents(); ++a) {
      auto s = std::make_unique<Slot>();
      HostAgentConfig hc;
      hc.t1_us = spec_.t1_us();
      hc.t2_us = spec_.t2_us();
      hc.agent_id = static_cast<std::uint32_t>(a);
      hc.agent_index = static_cast<std::uint32_t>(a);
      hc.agent_count = static_cast<std::uint32_t>(agents());
      hc.robust = cfg_.robust;
      s->host = std::make_unique<HostAgent>(hc, *sim_);
      auto [rl_end, host_end] = transport_ == Transport::kTcp ? tcp_pair() : memory_pair();
      s->endpoint = std::make_unique<HostEndpoint>(*s->host, cfg_.grid, std::move(host_end));
      s->rl = std::make_unique<RlHostInterface>(hc.agent_id, std::move(rl_end));
      const std::uint64_t base = derive_seed(seed_, 0x57A7E);
      s->state_rng.seed(a == 0 ? base : derive_seed(base, a));
      s->endpoint->hello();
      s->rl->receive_hello();
      slots_.push_back(std::move(s));
    }
    steps_ = 0;
    run_interval();
    return collect().states;
  }

  struct StepOut {
    std::vector<std::vector<double>> states;
    std::vector<double> rewards;  // per agent, before team averaging
    double team_reward = 0;
    bool done = false;
  };

  StepOut step(const std::vector<std::pair<std::size_t, std::size_t>>& actions) {
    if (actions.size() != agents()) throw std::invalid_argument("one action per agent required");
    for (std::size_t a = 0; a < agents(); ++a) {
      auto& s = *slots_[a];
      s.rl->send_params(cfg_.grid.decode(actions[a].first, actions[a].second));
      s.endpoint->serve_one();
      const auto res = s.rl->receive_reply();
      if (!res.ok) throw std::invalid_argument(res.error);
    }
    const bool done = run_interval();
    ++steps_;
    auto out = collect();
    out.done = done;
    return out;
  }

  netsim::Simulator& simulator() { return *sim_; }
  HostAgent& host(std::size_t a) { return *slots_[a]->host; }
  const std::vector<env::FlowRow>& shared_rows(std::size_t a) const { return slots_[a]->shared; }

 private:
  struct Slot {
    std::unique_ptr<HostAgent> host;
    std::unique_ptr<HostEndpoint> endpoint;
    std::unique_ptr<RlHostInterface> rl;
    std::mt19937_64 state_rng;
    std::vector<env::FlowRow> latest_rows;
    std::vector<env::FlowRow> shared;
  };

  bool run_interval() {
    const SimTime end = spec_.duration_us();
    const SimTime stop = std::min(end, sim_->now() + spec_.t2_us());
    while (sim_->now() < stop) {
      sim_->advance_to(std::min(stop, sim_->now() + spec_.t1_us()));
      for (auto& s : slots_) s->host->monitor_tick();
    }
    return sim_->now() >= end;
  }

  StepOut collect() {
    std::vector<StatsReport> reps;
    for (auto& s : slots_) {
      s->endpoint->send_report();
      reps.push_back(s->rl->receive_stats());
      s->latest_rows = reps.back().rows;
    }
    if (agents() > 1 && steps_ % spec_.agents.share_every_steps == 0) {
      for (std::size_t a = 0; a < agents(); ++a) {
        slots_[a]->shared.clear();
        for (std::size_t j : neighbors_[a])
          slots_[a]->shared.insert(slots_[a]->shared.end(), slots_[j]->latest_rows.begin(), slots_[j]->latest_rows.end());
      }
    }
    StepOut out;
    double sum = 0;
    for (std::size_t a = 0; a < agents(); ++a) {
      auto& s = *slots_[a];
      const auto obs = env::observe(reps[a], cfg_, s.state_rng, s.shared.empty() ? nullptr : &s.shared);
      out.states.push_back(obs.state);
      out.rewards.push_back(obs.reward);
      sum += obs.reward;
    }
    out.team_reward = sum / static_cast<double>(agents());
    return out;
  }

  harness::ScenarioSpec spec_;
  harness::EnvSection cfg_;
  env::CcEnvOptions opt_;
  Transport transport_;
  std::vector<std::vector<std::size_t>> neighbors_;
  std::uint64_t episode_ = 0;
  std::uint64_t seed_ = 0;
  std::size_t steps_ = 0;
  std::unique_ptr<netsim::Simulator> sim_;
  std::vector<std::unique_ptr<Slot>> slots_;
};

inline std::uint64_t agent_seed(std::uint64_t seed, std::size_t agent) {
  return agent == 0 ? seed : derive_seed(seed, 0xA6E0 + agent);
}

struct MultiAgentStats {
  std::vector<rl::IterationStats> per_agent;
  double team_reward = 0;
  double consensus_penalty = 0;
};

// Cooperative PPO: each agent owns a policy and optimizes the team-average
// reward; at iteration boundaries neighbors pool trajectories, exchange
// values on fixed probe states for the consensus penalty, and average weights.
class MultiAgentTrainer {
 public:
  MultiAgentTrainer(const harness::ScenarioSpec& spec, const rl::NetShape& shape, const rl::PpoHyper& hyper,
                    std::uint64_t seed, Transport transport = Transport::kMemory)
      : spec_(spec), hyper_(hyper) {
    for (std::size_t i = 0; i < hyper.n_actors; ++i)
      worlds_.push_back(std::make_unique<World>(spec, env::CcEnvOptions{true, i, false}, transport));
    if (shape.input_dim != worlds_[0]->state_dim()) throw std::invalid_argument("network input != state size");
    const std::size_t n = worlds_[0]->agents();
    neighbors_ = worlds_[0]->neighbors();
    for (std::size_t a = 0; a < n; ++a) {
      trainers_.push_back(std::make_unique<rl::PpoTrainer>(shape, hyper, agent_seed(seed, a)));
      rngs_.emplace_back();
      for (std::size_t i = 0; i < hyper.n_actors; ++i) rngs_[a].emplace_back(derive_seed(agent_seed(seed, a), 1000 + i));
    }
    state_.assign(hyper.n_actors, {});
    need_reset_.assign(hyper.n_actors, true);
    if (n > 1 && spec.agents.kappa > 0) {
      std::mt19937_64 prng(derive_seed(seed, 0x9808E));
      std::uniform_real_distribution<double> u(0.0, 1.0);
      probes_.resize(spec.agents.probe_states, std::vector<double>(shape.input_dim));
      for (auto& p : probes_)
        for (double& v : p) v = u(prng);
    }
  }

  std::size_t agents() const { return trainers_.size(); }
  rl::PpoTrainer& trainer(std::size_t a) { return *trainers_[a]; }

  MultiAgentStats iterate() {
    const std::size_t n = agents();
    std::vector<std::vector<rl::Trajectory>> trajs(n, std::vector<rl::Trajectory>(worlds_.size()));
    std::size_t episodes = 0;
    for (std::size_t i = 0; i < worlds_.size(); ++i) {
      auto& w = *worlds_[i];
      for (std::size_t t = 0; t < hyper_.horizon; ++t) {
        if (need_reset_[i]) {
          state_[i] = w.reset();
          need_reset_[i] = false;
        }
        std::vector<std::pair<std::size_t, std::size_t>> acts(n);
        std::vector<rl::Step> steps(n);
        for (std::size_t a = 0; a < n; ++a) {
          const auto out = rl::forward(trainers_[a]->params(), state_[i][a]);
          const auto s = rl::sample_action(out.logits_rt, out.logits_bw, rngs_[a][i]);
          acts[a] = {s.i_rt, s.i_bw};
          steps[a].i_rt = s.i_rt;
          steps[a].i_bw = s.i_bw;
          steps[a].value = out.value;
          steps[a].log_prob = s.log_prob;
        }
        auto res = w.step(acts);
        for (std::size_t a = 0; a < n; ++a) {
          steps[a].state = std::move(state_[i][a]);
          steps[a].reward = res.team_reward;
          steps[a].done = res.done;
          trajs[a][i].steps.push_back(std::move(steps[a]));
        }
        state_[i] = std::move(res.states);
        if (res.done) {
          need_reset_[i] = true;
          ++episodes;
        }
      }
      for (std::size_t a = 0; a < n; ++a)
        trajs[a][i].bootstrap_value = need_reset_[i] ? 0.0 : rl::forward(trainers_[a]->params(), state_[i][a]).value;
    }

    std::vector<AgentSnapshot> snaps(n);
    for (std::size_t a = 0; a < n; ++a) {
      snaps[a].params = trainers_[a]->params();
      snaps[a].batch = rl::make_batch(trajs[a], hyper_.gamma, hyper_.lambda);
    }
    MultiAgentStats out;
    for (std::size_t a = 0; a < n; ++a) {
      rl::Batch batch = snaps[a].batch;
      for (std::size_t j : neighbors_[a]) batch.append(snaps[j].batch);
      rl::ValuePenalty pen;
      if (!probes_.empty()) {
        pen.probes = &probes_;
        pen.kappa = spec_.agents.kappa;
        for (std::size_t j : neighbors_[a]) pen.neighbor_values.push_back(values_on(snaps[j].params, probes_));
      }
      auto st = trainers_[a]->update(batch, pen.active() ? &pen : nullptr);
      st.mean_reward = rl::mean_reward(trajs[a]);
      st.episodes_finished = episodes;
      out.consensus_penalty += st.penalty / static_cast<double>(n);
      out.per_agent.push_back(st);
    }
    out.team_reward = out.per_agent[0].mean_reward;
    if (n > 1) {
      std::vector<AgentSnapshot> post(n);
      for (std::size_t a = 0; a < n; ++a) post[a].params = trainers_[a]->params();
      for (std::size_t a = 0; a < n; ++a) {
        AgentSnapshot self;
        self.params = post[a].params;
        std::vector<const AgentSnapshot*> nb;
        for (std::size_t j : neighbors_[a]) nb.push_back(&post[j]);
        share_merge(self, nb);
        trainers_[a]->set_params(self.params);
      }
    }
    return out;
  }

 private:
  harness::ScenarioSpec spec_;
  rl::PpoHyper hyper_;
  std::vector<std::unique_ptr<World>> worlds_;
  std::vector<std::vector<std::size_t>> neighbors_;
  std::vector<std::unique_ptr<rl::PpoTrainer>> trainers_;
  std::vector<std::vector<std::mt19937_64>> rngs_;
  std::vector<std::vector<std::vector<double>>> state_;
  std::vector<bool> need_reset_;
  std::vector<std::vector<double>> probes_;
};

}  // namespace bbrtune::agents
