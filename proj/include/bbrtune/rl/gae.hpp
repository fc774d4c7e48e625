#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace bbrtune::rl {

struct Step {
  std::vector<double> state;
  std::size_t i_rt = 0;
  std::size_t i_bw = 0;
  double reward = 0;
  double value = 0;
  double log_prob = 0;
  bool done = false;  // episode ended after this step
};

struct Trajectory {
  std::vector<Step> steps;
  // V(s_T) for the state following the last step; ignored if that step is terminal.
  double bootstrap_value = 0;

  std::size_t size() const { return steps.size(); }
};

struct AdvantageEstimates {
  std::vector<double> advantages;
  std::vector<double> v_targets;
};

// Reverse recursion with A_T = 0. A terminal step cuts both the bootstrap and
// the advantage carried back from the next episode.
inline AdvantageEstimates compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                                      const std::vector<bool>& dones, double gamma, double lambda) {
  const std::size_t T = rewards.size();
  if (values.size() != T + 1) throw std::invalid_argument("compute_gae needs T+1 values");
  if (dones.size() != T) throw std::invalid_argument("compute_gae needs T done flags");
  AdvantageEstimates out;
  out.advantages.assign(T, 0.0);
  out.v_targets.assign(T, 0.0);
  double next_adv = 0;
  for (std::size_t t = T; t-- > 0;) {
    const double keep = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * values[t + 1] * keep - values[t];
    next_adv = delta + gamma * lambda * keep * next_adv;
    out.advantages[t] = next_adv;
    out.v_targets[t] = next_adv + values[t];
  }
  return out;
}

inline AdvantageEstimates compute_gae(const Trajectory& traj, double gamma, double lambda) {
  std::vector<double> r, v;
  std::vector<bool> d;
  r.reserve(traj.size());
  v.reserve(traj.size() + 1);
  for (const auto& s : traj.steps) {
    r.push_back(s.reward);
    v.push_back(s.value);
    d.push_back(s.done);
  }
  v.push_back(traj.bootstrap_value);
  return compute_gae(r, v, d, gamma, lambda);
}

}  // namespace bbrtune::rl
