#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bbrtune/agents/filters.hpp"
#include "bbrtune/env/action.hpp"
#include "bbrtune/env/reward.hpp"
#include "bbrtune/env/state.hpp"
#include "bbrtune/netsim/types.hpp"
#include "bbrtune/rng.hpp"

namespace bbrtune::harness {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EventSpec {
  double at_s = 0;
  std::string type;  // set_bandwidth | set_latency | flow_join | flow_leave
  double value = 0;  // bits/s, RTT in ms, or flow id
};

struct FlowSpec {
  FlowId id = 1;
  double start_s = 0;
  std::optional<double> stop_s;
};

// Piecewise-constant random path: every interval both bandwidth and RTT are redrawn.
struct RandomEvents {
  double bw_lo_bps = 1e6, bw_hi_bps = 10e6;
  double rtt_lo_ms = 10, rtt_hi_ms = 50;
  double interval_lo_s = 1, interval_hi_s = 50;
  bool randomize_initial = true;
};

// Random flow arrivals and departures on top of the listed flows.
struct FlowChurn {
  std::uint32_t max_flows = 4;
  double interval_lo_s = 5, interval_hi_s = 20;
};

struct AgentLayout {
  std::size_t count = 1;
  std::string topology = "ring";  // ring | mesh
  double kappa = 0.1;
  std::size_t share_every_steps = 5;
  std::size_t probe_states = 512;
};

struct EnvSection {
  std::size_t f_max = 8;
  double t1_ms = 100;
  double t2_s = 2;
  env::ActionGrid grid;
  env::RewardConfig reward;
  std::optional<double> reward_normalizer_bps;
  env::StateScales scales;
  agents::RobustnessConfig robust;
};

struct ScenarioSpec {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  double duration_s = 30;
  double capacity_bps = 20e6;
  double rtt_ms = 40;
  std::optional<std::int64_t> buffer_bytes;
  std::vector<EventSpec> events;
  std::optional<RandomEvents> random;
  std::optional<FlowChurn> churn;
  std::vector<FlowSpec> flows{FlowSpec{}};
  EnvSection env;
  AgentLayout agents;

  // Largest capacity the scenario can reach; the default throughput normalizer.
  double max_capacity_bps() const {
    double m = capacity_bps;
    for (const auto& e : events)
      if (e.type == "set_bandwidth") m = std::max(m, e.value);
    if (random) m = std::max(m, random->bw_hi_bps);
    return m;
  }
  SimTime t1_us() const { return from_millis(env.t1_ms); }
  SimTime t2_us() const { return from_seconds(env.t2_s); }
  SimTime duration_us() const { return from_seconds(duration_s); }
};

struct Materialized {
  netsim::LinkSpec link;
  std::vector<netsim::NetworkEvent> events;
};

inline void validate(const ScenarioSpec& s) {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (!(s.duration_s > 0)) fail("duration_s must be > 0");
  if (!(s.capacity_bps > 0)) fail("link.capacity_bps must be > 0");
  if (!(s.rtt_ms >= 0)) fail("link.rtt_ms must be >= 0");
  if (s.buffer_bytes && *s.buffer_bytes < kMss) fail("link.buffer_bytes must hold one 1500-byte packet");
  std::set<FlowId> ids;
  for (const auto& f : s.flows) {
    if (!ids.insert(f.id).second) fail("duplicate flow id " + std::to_string(f.id));
    if (!(f.start_s >= 0)) fail("flow start_s must be >= 0");
    if (f.stop_s && !(*f.stop_s > f.start_s)) fail("flow stop_s must be after start_s");
  }
  for (const auto& e : s.events) {
    if (!(e.at_s >= 0)) fail("event at_s must be >= 0");
    if (e.type == "set_bandwidth") {
      if (!(e.value > 0)) fail("set_bandwidth value must be > 0");
    } else if (e.type == "set_latency") {
      if (!(e.value >= 0)) fail("set_latency value must be >= 0");
    } else if (e.type == "flow_join" || e.type == "flow_leave") {
      if (!(e.value >= 0) || e.value != std::floor(e.value)) fail("flow event value must be a flow id");
    } else {
      fail("unknown event type '" + e.type + "'");
    }
  }
  if (s.random) {
    const auto& r = *s.random;
    if (!(r.bw_lo_bps > 0 && r.bw_lo_bps <= r.bw_hi_bps)) fail("random bandwidth range must be 0 < lo <= hi");
    if (!(r.rtt_lo_ms >= 0 && r.rtt_lo_ms <= r.rtt_hi_ms)) fail("random latency range must be 0 <= lo <= hi");
    if (!(r.interval_lo_s > 0 && r.interval_lo_s <= r.interval_hi_s)) fail("random interval range must be 0 < lo <= hi");
  }
  if (s.churn) {
    if (s.churn->max_flows < 1) fail("churn.max_flows must be >= 1");
    if (!(s.churn->interval_lo_s > 0 && s.churn->interval_lo_s <= s.churn->interval_hi_s))
      fail("churn interval range must be 0 < lo <= hi");
  }
  if (s.env.f_max < 1) fail("env.f_max must be >= 1");
  if (!(s.env.t1_ms > 0) || !(s.env.t2_s > 0)) fail("env.t1_ms and env.t2_s must be > 0");
  if (!(s.env.t1_ms / 1000.0 < s.env.t2_s)) fail("env.t1_ms must be shorter than env.t2_s");
  if (s.t2_us() % s.t1_us() != 0) fail("env.t2_s must be a whole multiple of env.t1_ms");
  try {
    s.env.grid.validate();
    s.env.reward.validate();
    s.env.robust.validate();
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
  if (s.env.reward_normalizer_bps && !(*s.env.reward_normalizer_bps > 0)) fail("reward.normalizer_bps must be > 0");
  if (s.agents.count < 1) fail("agents.count must be >= 1");
  if (s.agents.topology != "ring" && s.agents.topology != "mesh") fail("agents.topology must be ring or mesh");
  if (!(s.agents.kappa >= 0)) fail("agents.kappa must be >= 0");
  if (s.agents.share_every_steps < 1) fail("agents.share_every_steps must be >= 1");
}

// Effective reward/state settings with scenario-derived defaults filled in.
inline EnvSection resolved_env(const ScenarioSpec& s) {
  EnvSection e = s.env;
  const double norm = s.env.reward_normalizer_bps.value_or(s.max_capacity_bps());
  e.reward.normalizer_bps = norm;
  e.scales.rate_bps = norm;
  return e;
}

// Expands flows, explicit events and random generators into a concrete
// schedule. Identical (spec, seed) give identical output.
inline Materialized materialize(const ScenarioSpec& s, std::uint64_t seed) {
  Materialized m;
  std::mt19937_64 rng(derive_seed(seed, 0x5CE4));
  auto uni = [&](double lo, double hi) { return lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng); };
  double cap = s.capacity_bps, rtt_ms = s.rtt_ms;
  if (s.random && s.random->randomize_initial) {
    cap = uni(s.random->bw_lo_bps, s.random->bw_hi_bps);
    rtt_ms = uni(s.random->rtt_lo_ms, s.random->rtt_hi_ms);
  }
  m.link.capacity_bps = cap;
  m.link.prop_delay_us = from_millis(rtt_ms) / 2;
  m.link.buffer_bytes = s.buffer_bytes.value_or(netsim::default_buffer_bytes(cap, 2 * m.link.prop_delay_us));

  const SimTime end = s.duration_us();
  for (const auto& f : s.flows) {
    m.events.push_back({from_seconds(f.start_s), netsim::FlowJoin{f.id}});
    if (f.stop_s) m.events.push_back({from_seconds(*f.stop_s), netsim::FlowLeave{f.id}});
  }
  for (const auto& e : s.events) {
    const SimTime at = from_seconds(e.at_s);
    if (e.type == "set_bandwidth") m.events.push_back({at, netsim::SetBandwidth{e.value}});
    else if (e.type == "set_latency") m.events.push_back({at, netsim::SetLatency{from_millis(e.value)}});
    else if (e.type == "flow_join") m.events.push_back({at, netsim::FlowJoin{static_cast<FlowId>(e.value)}});
    else if (e.type == "flow_leave") m.events.push_back({at, netsim::FlowLeave{static_cast<FlowId>(e.value)}});
  }
  if (s.random) {
    const auto& r = *s.random;
    double t = uni(r.interval_lo_s, r.interval_hi_s);
    while (from_seconds(t) < end) {
      const double bw = uni(r.bw_lo_bps, r.bw_hi_bps);
      const double lat = uni(r.rtt_lo_ms, r.rtt_hi_ms);
      m.events.push_back({from_seconds(t), netsim::SetBandwidth{bw}});
      m.events.push_back({from_seconds(t), netsim::SetLatency{from_millis(lat)}});
      t += uni(r.interval_lo_s, r.interval_hi_s);
    }
  }
  if (s.churn) {
    std::mt19937_64 crng(derive_seed(seed, 0xC4A7));
    std::set<FlowId> active;
    FlowId next_id = 1;
    for (const auto& f : s.flows) {
      active.insert(f.id);
      next_id = std::max(next_id, f.id + 1);
    }
    auto cuni = [&](double lo, double hi) { return lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(crng); };
    double t = cuni(s.churn->interval_lo_s, s.churn->interval_hi_s);
    while (from_seconds(t) < end) {
      const bool join = active.size() <= 1 || (active.size() < s.churn->max_flows && cuni(0, 1) < 0.5);
      if (join) {
        m.events.push_back({from_seconds(t), netsim::FlowJoin{next_id}});
        active.insert(next_id++);
      } else {
        auto it = active.begin();
        std::advance(it, std::uniform_int_distribution<std::size_t>(0, active.size() - 1)(crng));
        m.events.push_back({from_seconds(t), netsim::FlowLeave{*it}});
        active.erase(it);
      }
      t += cuni(s.churn->interval_lo_s, s.churn->interval_hi_s);
    }
  }
  std::stable_sort(m.events.begin(), m.events.end(),
                   [](const netsim::NetworkEvent& a, const netsim::NetworkEvent& b) { return a.at < b.at; });
  return m;
}

namespace detail {
template <typename T>
void get_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}
inline void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}
}  // namespace detail

inline ScenarioSpec scenario_from_json(const json& j) {
  using detail::get_opt;
  using detail::reject_unknown;
  ScenarioSpec s;
  try {
    reject_unknown(j, {"name", "seed", "duration_s", "link", "events", "random", "churn", "flows", "env", "agents",
                       "notes", "$schema"},
                   "scenario");
    get_opt(j, "name", s.name);
    get_opt(j, "seed", s.seed);
    get_opt(j, "duration_s", s.duration_s);
    if (j.contains("link")) {
      const auto& l = j.at("link");
      reject_unknown(l, {"capacity_bps", "rtt_ms", "buffer_bytes"}, "link");
      get_opt(l, "capacity_bps", s.capacity_bps);
      get_opt(l, "rtt_ms", s.rtt_ms);
      if (l.contains("buffer_bytes")) s.buffer_bytes = l.at("buffer_bytes").get<std::int64_t>();
    }
    if (j.contains("events")) {
      for (const auto& e : j.at("events")) {
        reject_unknown(e, {"at_s", "type", "value"}, "event");
        EventSpec ev;
        ev.at_s = e.at("at_s").get<double>();
        ev.type = e.at("type").get<std::string>();
        ev.value = e.at("value").get<double>();
        s.events.push_back(ev);
      }
    }
    if (j.contains("random")) {
      const auto& r = j.at("random");
      reject_unknown(r, {"bandwidth_bps", "rtt_ms", "interval_s", "randomize_initial"}, "random");
      RandomEvents re;
      if (r.contains("bandwidth_bps")) {
        re.bw_lo_bps = r.at("bandwidth_bps").at(0).get<double>();
        re.bw_hi_bps = r.at("bandwidth_bps").at(1).get<double>();
      }
      if (r.contains("rtt_ms")) {
        re.rtt_lo_ms = r.at("rtt_ms").at(0).get<double>();
        re.rtt_hi_ms = r.at("rtt_ms").at(1).get<double>();
      }
      if (r.contains("interval_s")) {
        re.interval_lo_s = r.at("interval_s").at(0).get<double>();
        re.interval_hi_s = r.at("interval_s").at(1).get<double>();
      }
      get_opt(r, "randomize_initial", re.randomize_initial);
      s.random = re;
    }
    if (j.contains("churn")) {
      const auto& c = j.at("churn");
      reject_unknown(c, {"max_flows", "interval_s"}, "churn");
      FlowChurn fc;
      get_opt(c, "max_flows", fc.max_flows);
      if (c.contains("interval_s")) {
        fc.interval_lo_s = c.at("interval_s").at(0).get<double>();
        fc.interval_hi_s = c.at("interval_s").at(1).get<double>();
      }
      s.churn = fc;
    }
    if (j.contains("flows")) {
      s.flows.clear();
      for (const auto& f : j.at("flows")) {
        reject_unknown(f, {"id", "start_s", "stop_s"}, "flow");
        FlowSpec fs;
        fs.id = f.at("id").get<FlowId>();
        get_opt(f, "start_s", fs.start_s);
        if (f.contains("stop_s") && !f.at("stop_s").is_null()) fs.stop_s = f.at("stop_s").get<double>();
        s.flows.push_back(fs);
      }
    }
    if (j.contains("env")) {
      const auto& e = j.at("env");
      reject_unknown(e, {"f_max", "t1_ms", "t2_s", "action_grid", "reward", "state_scales", "robustness"}, "env");
      get_opt(e, "f_max", s.env.f_max);
      get_opt(e, "t1_ms", s.env.t1_ms);
      get_opt(e, "t2_s", s.env.t2_s);
      if (e.contains("action_grid")) {
        const auto& g = e.at("action_grid");
        reject_unknown(g, {"rt_s", "bw_rounds"}, "env.action_grid");
        get_opt(g, "rt_s", s.env.grid.rt_s);
        get_opt(g, "bw_rounds", s.env.grid.bw_rounds);
      }
      if (e.contains("reward")) {
        const auto& r = e.at("reward");
        reject_unknown(r, {"alpha", "normalizer_bps", "scale_per_ms", "double_sigmoid", "kp", "kd", "ki", "ma_window"},
                       "env.reward");
        auto& rc = s.env.reward;
        get_opt(r, "alpha", rc.alpha);
        if (r.contains("normalizer_bps")) s.env.reward_normalizer_bps = r.at("normalizer_bps").get<double>();
        get_opt(r, "scale_per_ms", rc.scale_per_ms);
        get_opt(r, "double_sigmoid", rc.double_sigmoid);
        get_opt(r, "kp", rc.kp);
        get_opt(r, "kd", rc.kd);
        get_opt(r, "ki", rc.ki);
        get_opt(r, "ma_window", rc.ma_window);
      }
      if (e.contains("state_scales")) {
        const auto& c = e.at("state_scales");
        reject_unknown(c, {"rtt_us", "cwnd_bytes", "gain"}, "env.state_scales");
        get_opt(c, "rtt_us", s.env.scales.rtt_us);
        get_opt(c, "cwnd_bytes", s.env.scales.cwnd_bytes);
        get_opt(c, "gain", s.env.scales.gain);
      }
      if (e.contains("robustness")) {
        const auto& r = e.at("robustness");
        reject_unknown(r, {"ema_alpha", "ma_window", "rtt_min_us", "rtt_max_us", "rate_margin", "reward_min",
                           "reward_max"},
                       "env.robustness");
        auto& rb = s.env.robust;
        get_opt(r, "ema_alpha", rb.ema_alpha);
        get_opt(r, "ma_window", rb.ma_window);
        get_opt(r, "rtt_min_us", rb.rtt_min_us);
        get_opt(r, "rtt_max_us", rb.rtt_max_us);
        get_opt(r, "rate_margin", rb.rate_margin);
        get_opt(r, "reward_min", rb.reward_min);
        get_opt(r, "reward_max", rb.reward_max);
      }
    }
    if (j.contains("agents")) {
      const auto& a = j.at("agents");
      reject_unknown(a, {"count", "topology", "kappa", "share_every_steps", "probe_states"}, "agents");
      get_opt(a, "count", s.agents.count);
      get_opt(a, "topology", s.agents.topology);
      get_opt(a, "kappa", s.agents.kappa);
      get_opt(a, "share_every_steps", s.agents.share_every_steps);
      get_opt(a, "probe_states", s.agents.probe_states);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  validate(s);
  return s;
}

inline json scenario_to_json(const ScenarioSpec& s) {
  json j;
  j["name"] = s.name;
  j["seed"] = s.seed;
  j["duration_s"] = s.duration_s;
  j["link"] = {{"capacity_bps", s.capacity_bps}, {"rtt_ms", s.rtt_ms}};
  if (s.buffer_bytes) j["link"]["buffer_bytes"] = *s.buffer_bytes;
  j["events"] = json::array();
  for (const auto& e : s.events) j["events"].push_back({{"at_s", e.at_s}, {"type", e.type}, {"value", e.value}});
  if (s.random)
    j["random"] = {{"bandwidth_bps", {s.random->bw_lo_bps, s.random->bw_hi_bps}},
                   {"rtt_ms", {s.random->rtt_lo_ms, s.random->rtt_hi_ms}},
                   {"interval_s", {s.random->interval_lo_s, s.random->interval_hi_s}},
                   {"randomize_initial", s.random->randomize_initial}};
  if (s.churn)
    j["churn"] = {{"max_flows", s.churn->max_flows}, {"interval_s", {s.churn->interval_lo_s, s.churn->interval_hi_s}}};
  j["flows"] = json::array();
  for (const auto& f : s.flows) {
    json fj = {{"id", f.id}, {"start_s", f.start_s}};
    if (f.stop_s) fj["stop_s"] = *f.stop_s;
    j["flows"].push_back(fj);
  }
  const auto& e = s.env;
  j["env"] = {{"f_max", e.f_max},
              {"t1_ms", e.t1_ms},
              {"t2_s", e.t2_s},
              {"action_grid", {{"rt_s", e.grid.rt_s}, {"bw_rounds", e.grid.bw_rounds}}},
              {"reward",
               {{"alpha", e.reward.alpha},
                {"scale_per_ms", e.reward.scale_per_ms},
                {"double_sigmoid", e.reward.double_sigmoid},
                {"kp", e.reward.kp},
                {"kd", e.reward.kd},
                {"ki", e.reward.ki},
                {"ma_window", e.reward.ma_window}}},
              {"state_scales", {{"rtt_us", e.scales.rtt_us}, {"cwnd_bytes", e.scales.cwnd_bytes}, {"gain", e.scales.gain}}},
              {"robustness",
               {{"ema_alpha", e.robust.ema_alpha},
                {"ma_window", e.robust.ma_window},
                {"rtt_min_us", e.robust.rtt_min_us},
                {"rtt_max_us", e.robust.rtt_max_us},
                {"rate_margin", e.robust.rate_margin},
                {"reward_min", e.robust.reward_min},
                {"reward_max", e.robust.reward_max}}}};
  if (e.reward_normalizer_bps) j["env"]["reward"]["normalizer_bps"] = *e.reward_normalizer_bps;
  j["agents"] = {{"count", s.agents.count},
                 {"topology", s.agents.topology},
                 {"kappa", s.agents.kappa},
                 {"share_every_steps", s.agents.share_every_steps},
                 {"probe_states", s.agents.probe_states}};
  return j;
}

inline ScenarioSpec load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open scenario file " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return scenario_from_json(j);
}

}  // namespace bbrtune::harness
