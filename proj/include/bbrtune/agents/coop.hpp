#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "bbrtune/env/state.hpp"
#include "bbrtune/rl/loss.hpp"
#include "bbrtune/rl/policy.hpp"

namespace bbrtune::agents {

inline std::vector<std::vector<std::size_t>> neighbor_sets(std::size_t n, const std::string& topology) {
  std::vector<std::vector<std::size_t>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (topology == "mesh") {
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) out[i].push_back(j);
    } else if (topology == "ring") {
      if (n >= 2) out[i].push_back((i + n - 1) % n);
      if (n >= 3) out[i].push_back((i + 1) % n);
    } else {
      throw std::invalid_argument("unknown topology " + topology);
    }
  }
  return out;
}

inline double consensus_penalty(const std::vector<double>& v_self, const std::vector<std::vector<double>>& v_neighbors,
                                double kappa) {
  if (v_neighbors.empty()) return 0.0;
  double total = 0;
  for (const auto& vj : v_neighbors) {
    if (vj.size() != v_self.size()) throw std::invalid_argument("value vectors differ in length");
    double s = 0;
    for (std::size_t k = 0; k < vj.size(); ++k) s += (v_self[k] - vj[k]) * (v_self[k] - vj[k]);
    total += v_self.empty() ? 0.0 : s / static_cast<double>(v_self.size());
  }
  return kappa * total / static_cast<double>(v_neighbors.size());
}

// What one agent exposes to its neighbors at a sharing point.
struct AgentSnapshot {
  rl::PolicyParams params;
  std::vector<env::FlowRow> sensation;  // own latest flow rows
  rl::Batch batch;                      // own trajectories of the last iteration
  std::vector<env::FlowRow> shared;     // rows received from neighbors
};

// Shared sensation, pooled episodes and equal-weight parameter averaging.
inline void share_merge(AgentSnapshot& self, const std::vector<const AgentSnapshot*>& neighbors) {
  if (neighbors.empty()) return;
  for (const auto* n : neighbors)
    if (!(n->params.shape == self.params.shape) || n->params.size() != self.params.size())
      throw std::invalid_argument("incompatible model shapes");
  self.shared.clear();
  std::vector<double> avg = self.params.theta;
  for (const auto* n : neighbors) {
    self.shared.insert(self.shared.end(), n->sensation.begin(), n->sensation.end());
    self.batch.append(n->batch);
    for (std::size_t k = 0; k < avg.size(); ++k) avg[k] += n->params.theta[k];
  }
  const double w = 1.0 / static_cast<double>(neighbors.size() + 1);
  for (double& v : avg) v *= w;
  self.params.theta = std::move(avg);
}

inline std::vector<double> values_on(const rl::PolicyParams& p, const std::vector<std::vector<double>>& probes) {
  std::vector<double> v;
  v.reserve(probes.size());
  for (const auto& s : probes) v.push_back(rl::forward(p, s).value);
  return v;
}

}  // namespace bbrtune::agents
