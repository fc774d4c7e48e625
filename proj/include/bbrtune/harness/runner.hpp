#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "bbrtune/agents/world.hpp"
#include "bbrtune/env/cc_env.hpp"
#include "bbrtune/harness/manifest.hpp"
#include "bbrtune/harness/metrics.hpp"
#include "bbrtune/harness/plots.hpp"
#include "bbrtune/harness/scenario.hpp"
#include "bbrtune/rl/checkpoint.hpp"
#include "bbrtune/rl/ppo.hpp"

namespace bbrtune::harness {

inline rl::NetShape shape_for(const ScenarioSpec& s) {
  rl::NetShape sh;
  sh.input_dim = s.env.f_max * env::kNumFeatures;
  sh.k_rt = s.env.grid.rt_s.size();
  sh.k_bw = s.env.grid.bw_rounds.size();
  return sh;
}

// ---------------------------------------------------------------- training

struct TrainOptions {
  ScenarioSpec spec;
  rl::PpoHyper hyper;
  std::uint64_t seed = 1;
  std::size_t iters = 500;
  agents::Transport transport = agents::Transport::kMemory;
  std::string out_dir;  // empty: nothing is written
  std::function<void(const rl::IterationStats&)> on_iteration;
};

struct TrainResult {
  std::vector<rl::Checkpoint> checkpoints;  // one per RL agent
  std::vector<rl::IterationStats> history;  // agent 0
  std::vector<double> consensus_penalty;
};

inline void write_history_csv(std::ostream& os, const std::vector<rl::IterationStats>& h,
                              const std::vector<double>& penalty) {
  os << "iteration,mean_reward,clip_fraction,first_epoch_clip_fraction,entropy,value_loss,policy_loss,approx_kl,"
        "penalty,consensus_penalty,samples,episodes_finished\n";
  for (std::size_t i = 0; i < h.size(); ++i) {
    const auto& s = h[i];
    os << s.iteration << ',' << fmt_double(s.mean_reward) << ',' << fmt_double(s.clip_fraction) << ','
       << fmt_double(s.first_epoch_clip_fraction) << ',' << fmt_double(s.entropy) << ',' << fmt_double(s.value_loss)
       << ',' << fmt_double(s.policy_loss) << ',' << fmt_double(s.approx_kl) << ',' << fmt_double(s.penalty) << ','
       << fmt_double(i < penalty.size() ? penalty[i] : 0.0) << ',' << s.samples << ',' << s.episodes_finished << '\n';
  }
}

inline json train_manifest(const TrainOptions& o) {
  json m = base_manifest("train", o.spec, o.seed);
  m["iters"] = o.iters;
  m["transport"] = o.transport == agents::Transport::kTcp ? "tcp" : "mem";
  m["hyper"] = hyper_to_json(o.hyper);
  return m;
}

inline TrainOptions train_options_from_manifest(const json& m) {
  if (m.value("command", "") != "train") throw ConfigError("manifest is not from a train run");
  TrainOptions o;
  try {
    o.spec = scenario_from_json(m.at("scenario"));
    o.seed = m.at("seed").get<std::uint64_t>();
    o.iters = m.at("iters").get<std::size_t>();
    o.transport = agents::parse_transport(m.at("transport").get<std::string>());
    o.hyper = hyper_from_json(m.at("hyper"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
  return o;
}

inline TrainResult run_training(const TrainOptions& o) {
  validate(o.spec);
  o.hyper.validate();
  const auto shape = shape_for(o.spec);
  TrainResult res;
  const std::size_t n_agents = o.spec.agents.count;

  if (n_agents == 1 && o.transport == agents::Transport::kMemory) {
    std::vector<std::unique_ptr<env::CcEnv>> envs;
    std::vector<rl::Environment*> ptrs;
    for (std::size_t i = 0; i < o.hyper.n_actors; ++i) {
      envs.push_back(std::make_unique<env::CcEnv>(o.spec, env::CcEnvOptions{true, i, false}));
      ptrs.push_back(envs.back().get());
    }
    rl::PpoTrainer trainer(shape, o.hyper, o.seed, ptrs);
    for (std::size_t it = 0; it < o.iters; ++it) {
      res.history.push_back(trainer.iterate());
      res.consensus_penalty.push_back(0.0);
      if (o.on_iteration) o.on_iteration(res.history.back());
    }
    res.checkpoints.push_back({trainer.params(), o.hyper, o.seed, trainer.iteration()});
  } else {
    agents::MultiAgentTrainer trainer(o.spec, shape, o.hyper, o.seed, o.transport);
    for (std::size_t it = 0; it < o.iters; ++it) {
      auto st = trainer.iterate();
      res.history.push_back(st.per_agent.at(0));
      res.history.back().mean_reward = st.team_reward;
      res.consensus_penalty.push_back(st.consensus_penalty);
      if (o.on_iteration) o.on_iteration(res.history.back());
    }
    for (std::size_t a = 0; a < trainer.agents(); ++a)
      res.checkpoints.push_back({trainer.trainer(a).params(), o.hyper, agents::agent_seed(o.seed, a), trainer.trainer(a).iteration()});
  }

  if (!o.out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(o.out_dir);
    const fs::path dir(o.out_dir);
    json m = train_manifest(o);
    json outputs = json::object();
    const auto ck = (dir / "checkpoint.bin").string();
    rl::save_checkpoint(ck, res.checkpoints[0]);
    outputs["checkpoint.bin"] = file_hash(ck);
    for (std::size_t a = 1; a < res.checkpoints.size(); ++a) {
      const std::string name = "checkpoint_agent" + std::to_string(a) + ".bin";
      rl::save_checkpoint((dir / name).string(), res.checkpoints[a]);
      outputs[name] = file_hash((dir / name).string());
    }
    {
      std::ofstream f(dir / "train.csv", std::ios::binary);
      write_history_csv(f, res.history, res.consensus_penalty);
    }
    outputs["train.csv"] = file_hash((dir / "train.csv").string());
    m["outputs"] = outputs;
    write_json((dir / "manifest.json").string(), m);
  }
  return res;
}

// -------------------------------------------------------------- evaluation

struct EvalOptions {
  ScenarioSpec spec;
  std::uint64_t seed = 1;  // replaces spec.seed
  std::string mode = "vanilla";  // or a checkpoint path
  bool greedy = true;
  bool online = false;  // keep training during evaluation
  double online_lr = 1e-4;
  double threshold_us2 = kDefaultAccuracyThresholdUs2;
  std::optional<env::Windows> forced_windows;  // fixed action every step
  agents::Transport transport = agents::Transport::kMemory;
  std::string out_dir;
  bool plots = true;
};

struct EvalResult {
  netsim::TraceLog trace;
  MetricsReport report;
  std::vector<std::pair<double, double>> rewards;  // (time s, reward)
  std::vector<env::Windows> actions;
};

// Join and leave times plus network changes: the points where fair share moves.
inline std::vector<SimTime> change_times(const ScenarioSpec& spec, std::uint64_t seed) {
  const auto mat = materialize(spec, seed);
  std::vector<SimTime> out;
  for (const auto& e : mat.events)
    if (e.at > 0 && e.at < spec.duration_us() && (out.empty() || out.back() != e.at)) out.push_back(e.at);
  return out;
}

inline MetricsReport build_report(const EvalOptions& o, const ScenarioSpec& spec, const netsim::TraceLog& trace,
                                  const std::vector<std::pair<double, double>>& rewards) {
  MetricsReport r;
  r.scenario = spec.name;
  r.seed = spec.seed;
  r.mode = o.mode;
  r.threshold_us2 = o.threshold_us2;
  r.accuracy = estimation_accuracy(trace, o.threshold_us2);
  r.peak_rtt_us = peak_rtt_us(trace);
  r.mean_throughput_bps = mean_throughput_bps(trace);
  r.sq_error_cdf = squared_error_cdf(trace);
  r.throughput_cdf = throughput_cdf(trace);
  r.reward_curve = rewards;
  double s = 0;
  for (const auto& [t, v] : rewards) s += v;
  r.mean_reward = rewards.empty() ? 0.0 : s / static_cast<double>(rewards.size());
  const auto mat = materialize(spec, spec.seed);
  for (SimTime e : change_times(spec, spec.seed)) r.event_times_s.push_back(to_seconds(e));
  std::vector<SimTime> ev;
  for (double t : r.event_times_s) ev.push_back(from_seconds(t));
  r.convergence_s = convergence_times(trace, ev, mat.link.capacity_bps);
  return r;
}

namespace detail {

inline rl::Checkpoint checkpoint_for(const EvalOptions& o, const ScenarioSpec& spec) {
  auto ck = rl::load_checkpoint(o.mode);
  if (!(ck.params.shape == shape_for(spec)))
    throw std::invalid_argument("checkpoint network shape does not match the scenario (input " +
                                std::to_string(ck.params.shape.input_dim) + " vs " +
                                std::to_string(shape_for(spec).input_dim) + ")");
  return ck;
}

// Measurement only: the host agent monitors but nothing retunes BBR.
inline void eval_vanilla(const ScenarioSpec& spec, EvalResult& out) {
  const auto cfg = resolved_env(spec);
  auto sim = env::make_simulator(spec, spec.seed, true);
  agents::HostAgentConfig hc;
  hc.t1_us = spec.t1_us();
  hc.t2_us = spec.t2_us();
  hc.robust = cfg.robust;
  agents::HostAgent host(hc, *sim);
  std::mt19937_64 rng(derive_seed(spec.seed, 0x57A7E));
  const SimTime end = spec.duration_us();
  bool first = true;
  while (sim->now() < end) {
    const SimTime stop = std::min(end, sim->now() + spec.t2_us());
    while (sim->now() < stop) {
      sim->advance_to(std::min(stop, sim->now() + spec.t1_us()));
      host.monitor_tick();
    }
    const auto obs = env::observe(host.report(), cfg, rng);
    if (!first) {
      out.rewards.emplace_back(to_seconds(sim->now()), obs.reward);
      out.actions.push_back(host.windows());
    }
    first = false;
  }
  out.trace = sim->trace();
}

inline std::pair<std::size_t, std::size_t> choose(const rl::PolicyParams& p, const std::vector<double>& state,
                                                  const EvalOptions& o, const env::ActionGrid& grid,
                                                  std::mt19937_64& rng, rl::Step* step = nullptr) {
  if (o.forced_windows) {
    std::size_t i_rt = 0, i_bw = 0;
    if (!grid.index_of(*o.forced_windows, i_rt, i_bw))
      throw std::invalid_argument("forced windows are not on the action grid");
    return {i_rt, i_bw};
  }
  const auto f = rl::forward(p, state);
  if (o.greedy && !o.online) {
    const auto g = rl::greedy_action(f.logits_rt, f.logits_bw);
    return {g.i_rt, g.i_bw};
  }
  const auto s = rl::sample_action(f.logits_rt, f.logits_bw, rng);
  if (step) {
    step->i_rt = s.i_rt;
    step->i_bw = s.i_bw;
    step->value = f.value;
    step->log_prob = s.log_prob;
  }
  return {s.i_rt, s.i_bw};
}

inline void eval_single(const EvalOptions& o, const ScenarioSpec& spec, const rl::PolicyParams& params,
                        EvalResult& out) {
  env::CcEnv e(spec, env::CcEnvOptions{false, 0, true});
  std::mt19937_64 rng(derive_seed(spec.seed, 0xE7A1));
  const auto grid = e.env_config().grid;
  std::optional<rl::PpoTrainer> learner;
  rl::PpoHyper h;
  if (o.online) {
    h.learning_rate = o.online_lr;
    learner.emplace(params.shape, h, derive_seed(spec.seed, 0x0471));
    learner->set_params(params);
  }
  auto state = e.reset();
  rl::Trajectory traj;
  for (;;) {
    rl::Step st;
    const auto& p = learner ? learner->params() : params;
    const auto [i_rt, i_bw] = choose(p, state, o, grid, rng, &st);
    const auto res = e.step(i_rt, i_bw);
    out.rewards.emplace_back(to_seconds(e.simulator().now()), res.reward);
    out.actions.push_back(grid.decode(i_rt, i_bw));
    if (learner) {
      st.state = std::move(state);
      st.reward = res.reward;
      st.done = res.done;
      traj.steps.push_back(std::move(st));
      if (res.done || traj.steps.size() == h.horizon) {
        traj.bootstrap_value = res.done ? 0.0 : rl::forward(learner->params(), res.state).value;
        learner->update(rl::make_batch({traj}, h.gamma, h.lambda));
        traj = {};
      }
    }
    state = res.state;
    if (res.done) break;
  }
  out.trace = e.simulator().trace();
}

inline void eval_multi(const EvalOptions& o, const ScenarioSpec& spec, const rl::PolicyParams& params,
                       EvalResult& out) {
  agents::World w(spec, env::CcEnvOptions{false, 0, true}, o.transport);
  std::mt19937_64 rng(derive_seed(spec.seed, 0xE7A1));
  const auto grid = resolved_env(spec).grid;
  auto states = w.reset();
  for (;;) {
    std::vector<std::pair<std::size_t, std::size_t>> acts;
    for (const auto& s : states) acts.push_back(choose(params, s, o, grid, rng));
    const auto res = w.step(acts);
    out.rewards.emplace_back(to_seconds(w.simulator().now()), res.team_reward);
    out.actions.push_back(grid.decode(acts[0].first, acts[0].second));
    states = res.states;
    if (res.done) break;
  }
  out.trace = w.simulator().trace();
}

}  // namespace detail

inline json eval_manifest(const EvalOptions& o) {
  json m = base_manifest("eval", o.spec, o.seed);
  m["mode"] = o.mode;
  if (o.mode != "vanilla") m["checkpoint_hash"] = file_hash(o.mode);
  m["greedy"] = o.greedy;
  m["online"] = o.online;
  m["online_lr"] = o.online_lr;
  m["threshold_us2"] = o.threshold_us2;
  m["transport"] = o.transport == agents::Transport::kTcp ? "tcp" : "mem";
  if (o.forced_windows) m["forced_windows"] = {o.forced_windows->rt_ms, o.forced_windows->bw_rounds};
  return m;
}

inline EvalOptions eval_options_from_manifest(const json& m) {
  if (m.value("command", "") != "eval") throw ConfigError("manifest is not from an eval run");
  EvalOptions o;
  try {
    o.spec = scenario_from_json(m.at("scenario"));
    o.seed = m.at("seed").get<std::uint64_t>();
    o.mode = m.at("mode").get<std::string>();
    o.greedy = m.at("greedy").get<bool>();
    o.online = m.at("online").get<bool>();
    o.online_lr = m.at("online_lr").get<double>();
    o.threshold_us2 = m.at("threshold_us2").get<double>();
    o.transport = agents::parse_transport(m.at("transport").get<std::string>());
    if (m.contains("forced_windows"))
      o.forced_windows = env::Windows{m["forced_windows"][0].get<std::uint32_t>(), m["forced_windows"][1].get<std::uint32_t>()};
  } catch (const json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
  return o;
}

inline EvalResult run_eval(const EvalOptions& o) {
  ScenarioSpec spec = o.spec;
  spec.seed = o.seed;
  validate(spec);
  EvalResult out;
  if (o.mode == "vanilla") {
    detail::eval_vanilla(spec, out);
  } else {
    const auto ck = detail::checkpoint_for(o, spec);
    if (spec.agents.count > 1) {
      if (o.online) throw ConfigError("online learning is only supported with one agent");
      detail::eval_multi(o, spec, ck.params, out);
    } else {
      detail::eval_single(o, spec, ck.params, out);
    }
  }
  out.report = build_report(o, spec, out.trace, out.rewards);

  if (!o.out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(o.out_dir);
    const fs::path dir(o.out_dir);
    json outputs = json::object();
    out.trace.write_csv((dir / "trace.csv").string());
    outputs["trace.csv"] = file_hash((dir / "trace.csv").string());
    {
      std::ofstream f(dir / "report.csv", std::ios::binary);
      write_report_csv(f, out.report);
    }
    outputs["report.csv"] = file_hash((dir / "report.csv").string());
    {
      std::ofstream f(dir / "actions.csv", std::ios::binary);
      f << "time_s,w_rt_ms,w_bw_rounds,reward\n";
      for (std::size_t i = 0; i < out.actions.size(); ++i)
        f << fmt_double(out.rewards[i].first) << ',' << out.actions[i].rt_ms << ',' << out.actions[i].bw_rounds << ','
          << fmt_double(out.rewards[i].second) << '\n';
    }
    if (o.plots)
      for (const auto& p : emit_plots(out.report, out.trace, dir / "plots"))
        outputs[fs::relative(p, dir).string()] = file_hash(p);
    json m = eval_manifest(o);
    m["outputs"] = outputs;
    write_json((dir / "manifest.json").string(), m);
  }
  return out;
}

}  // namespace bbrtune::harness
