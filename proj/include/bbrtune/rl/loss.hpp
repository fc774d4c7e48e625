#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "bbrtune/rl/categorical.hpp"
#include "bbrtune/rl/hyper.hpp"
#include "bbrtune/rl/policy.hpp"

namespace bbrtune::rl {

inline double clipped_surrogate(double ratio, double adv, double eps) {
  return std::min(ratio * adv, std::clamp(ratio, 1.0 - eps, 1.0 + eps) * adv);
}

struct Batch {
  std::vector<std::vector<double>> states;
  std::vector<std::size_t> i_rt, i_bw;
  std::vector<double> old_log_prob;
  std::vector<double> advantages;
  std::vector<double> v_targets;

  std::size_t size() const { return states.size(); }
  void append(const Batch& o) {
    states.insert(states.end(), o.states.begin(), o.states.end());
    i_rt.insert(i_rt.end(), o.i_rt.begin(), o.i_rt.end());
    i_bw.insert(i_bw.end(), o.i_bw.begin(), o.i_bw.end());
    old_log_prob.insert(old_log_prob.end(), o.old_log_prob.begin(), o.old_log_prob.end());
    advantages.insert(advantages.end(), o.advantages.begin(), o.advantages.end());
    v_targets.insert(v_targets.end(), o.v_targets.begin(), o.v_targets.end());
  }
  Batch select(const std::vector<std::size_t>& idx) const {
    Batch b;
    for (std::size_t i : idx) {
      b.states.push_back(states[i]);
      b.i_rt.push_back(i_rt[i]);
      b.i_bw.push_back(i_bw[i]);
      b.old_log_prob.push_back(old_log_prob[i]);
      b.advantages.push_back(advantages[i]);
      b.v_targets.push_back(v_targets[i]);
    }
    return b;
  }
};

// Extra critic term kappa * mean_j mean_s (V(s) - V_j(s))^2 over fixed probe states.
struct ValuePenalty {
  const std::vector<std::vector<double>>* probes = nullptr;
  std::vector<std::vector<double>> neighbor_values;
  double kappa = 0;

  bool active() const { return probes && kappa > 0 && !neighbor_values.empty(); }
};

struct LossResult {
  double loss = 0;       // quantity minimized
  double surrogate = 0;  // L_clip
  double value_loss = 0; // L_vf
  double entropy = 0;    // S
  double penalty = 0;
  double clip_fraction = 0;
  double approx_kl = 0;
  std::vector<double> grad;
};

inline void normalize_in_place(std::vector<double>& a) {
  if (a.empty()) return;
  double mean = 0;
  for (double v : a) mean += v;
  mean /= static_cast<double>(a.size());
  double var = 0;
  for (double v : a) var += (v - mean) * (v - mean);
  var /= static_cast<double>(a.size());
  const double sd = std::sqrt(var) + 1e-8;
  for (double& v : a) v = (v - mean) / sd;
}

// Negated PPO objective -(L_clip - c1 L_vf + c2 beta S) plus an optional
// consensus penalty, with its exact gradient when `with_grad`.
inline LossResult total_loss(const PolicyParams& p, const Batch& b, const PpoHyper& h, bool with_grad = true,
                             const ValuePenalty* pen = nullptr) {
  const std::size_t n = b.size();
  if (n == 0) throw std::invalid_argument("empty batch");
  LossResult r;
  if (with_grad) r.grad.assign(p.size(), 0.0);
  std::vector<double> adv = b.advantages;
  if (h.normalize_advantages) normalize_in_place(adv);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double ent_coef = h.c2 * h.beta_entropy;
  std::size_t clipped = 0;

  ForwardCache cache;
  for (std::size_t i = 0; i < n; ++i) {
    const auto out = forward(p, b.states[i], &cache);
    const auto l1 = log_softmax(out.logits_rt);
    const auto l2 = log_softmax(out.logits_bw);
    const double logp = l1[b.i_rt[i]] + l2[b.i_bw[i]];
    const double ratio = std::exp(logp - b.old_log_prob[i]);
    const double a = adv[i];
    const double unclipped = ratio * a;
    const double clipped_v = std::clamp(ratio, 1.0 - h.clip_eps, 1.0 + h.clip_eps) * a;
    const bool clip_active = clipped_v < unclipped;
    if (std::abs(ratio - 1.0) > h.clip_eps) ++clipped;
    r.surrogate += std::min(unclipped, clipped_v) * inv_n;
    const double verr = out.value - b.v_targets[i];
    r.value_loss += verr * verr * inv_n;
    const double h1 = entropy_from_log(l1), h2 = entropy_from_log(l2);
    r.entropy += (h1 + h2) * inv_n;
    r.approx_kl += (b.old_log_prob[i] - logp) * inv_n;
    if (!with_grad) continue;

    // d loss / d logp from the surrogate; zero where the clip binds.
    const double g_logp = clip_active ? 0.0 : -unclipped * inv_n;
    auto head_grad = [&](const std::vector<double>& lp, std::size_t chosen, double hsum) {
      std::vector<double> d(lp.size());
      for (std::size_t k = 0; k < lp.size(); ++k) {
        const double pk = std::exp(lp[k]);
        const double d_logp = (k == chosen ? 1.0 : 0.0) - pk;
        const double d_ent = -pk * (lp[k] + hsum);
        d[k] = g_logp * d_logp - ent_coef * inv_n * d_ent;
      }
      return d;
    };
    const auto d_rt = head_grad(l1, b.i_rt[i], h1);
    const auto d_bw = head_grad(l2, b.i_bw[i], h2);
    backward(p, cache, d_rt, d_bw, h.c1 * 2.0 * verr * inv_n, r.grad);
  }
  r.clip_fraction = static_cast<double>(clipped) * inv_n;

  if (pen && pen->active()) {
    const auto& probes = *pen->probes;
    const double m = static_cast<double>(probes.size());
    const double nj = static_cast<double>(pen->neighbor_values.size());
    for (const auto& nv : pen->neighbor_values)
      if (nv.size() != probes.size()) throw std::invalid_argument("neighbor value vector length mismatch");
    const std::vector<double> zero_rt(p.shape.k_rt, 0.0), zero_bw(p.shape.k_bw, 0.0);
    for (std::size_t s = 0; s < probes.size(); ++s) {
      const double v = forward(p, probes[s], with_grad ? &cache : nullptr).value;
      double dv = 0;
      for (const auto& nv : pen->neighbor_values) {
        const double d = v - nv[s];
        r.penalty += pen->kappa * d * d / (m * nj);
        dv += pen->kappa * 2.0 * d / (m * nj);
      }
      if (with_grad) backward(p, cache, zero_rt, zero_bw, h.c1 * dv, r.grad);
    }
  }
  r.loss = -r.surrogate + h.c1 * (r.value_loss + r.penalty) - ent_coef * r.entropy;
  return r;
}

}  // namespace bbrtune::rl
