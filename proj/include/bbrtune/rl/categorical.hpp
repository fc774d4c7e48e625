#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

namespace bbrtune::rl {

inline std::vector<double> log_softmax(const std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0;
  for (double v : z) s += std::exp(v - m);
  const double lse = m + std::log(s);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - lse;
  return out;
}

inline std::vector<double> softmax(const std::vector<double>& z) {
  auto p = log_softmax(z);
  for (double& v : p) v = std::exp(v);
  return p;
}

inline double entropy_from_log(const std::vector<double>& logp) {
  double h = 0;
  for (double lp : logp) {
    const double p = std::exp(lp);
    if (p > 0) h -= p * lp;
  }
  return h;
}

// Inverse-CDF draw; one uniform variate per call keeps RNG consumption fixed.
inline std::size_t sample_index(const std::vector<double>& probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  double acc = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (x < acc) return i;
  }
  for (std::size_t i = probs.size(); i-- > 0;)
    if (probs[i] > 0) return i;
  return probs.size() - 1;
}

struct ActionSample {
  std::size_t i_rt = 0;
  std::size_t i_bw = 0;
  double log_prob = 0;
  double entropy = 0;
};

inline ActionSample sample_action(const std::vector<double>& logits_rt, const std::vector<double>& logits_bw,
                                  std::mt19937_64& rng) {
  const auto l1 = log_softmax(logits_rt);
  const auto l2 = log_softmax(logits_bw);
  std::vector<double> p1(l1.size()), p2(l2.size());
  std::transform(l1.begin(), l1.end(), p1.begin(), [](double v) { return std::exp(v); });
  std::transform(l2.begin(), l2.end(), p2.begin(), [](double v) { return std::exp(v); });
  ActionSample a;
  a.i_rt = sample_index(p1, rng);
  a.i_bw = sample_index(p2, rng);
  a.log_prob = l1[a.i_rt] + l2[a.i_bw];
  a.entropy = entropy_from_log(l1) + entropy_from_log(l2);
  return a;
}

inline ActionSample greedy_action(const std::vector<double>& logits_rt, const std::vector<double>& logits_bw) {
  const auto l1 = log_softmax(logits_rt);
  const auto l2 = log_softmax(logits_bw);
  ActionSample a;
  a.i_rt = static_cast<std::size_t>(std::max_element(l1.begin(), l1.end()) - l1.begin());
  a.i_bw = static_cast<std::size_t>(std::max_element(l2.begin(), l2.end()) - l2.begin());
  a.log_prob = l1[a.i_rt] + l2[a.i_bw];
  a.entropy = entropy_from_log(l1) + entropy_from_log(l2);
  return a;
}

}  // namespace bbrtune::rl
