#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace bbrtune::rl {

struct NetShape {
  std::size_t input_dim = 0;
  std::size_t hidden = 64;
  std::size_t layers = 2;
  std::size_t k_rt = 5;
  std::size_t k_bw = 5;

  bool operator==(const NetShape&) const = default;
};

// Offsets of every weight block inside the flat parameter vector.
struct Layout {
  struct Dense {
    std::size_t in = 0, out = 0, w = 0, b = 0;
  };
  std::vector<Dense> trunk;
  Dense head_rt, head_bw, value;
  std::size_t total = 0;

  explicit Layout(const NetShape& s) {
    if (s.input_dim == 0 || s.hidden == 0 || s.layers == 0 || s.k_rt == 0 || s.k_bw == 0)
      throw std::invalid_argument("network dimensions must be positive");
    std::size_t in = s.input_dim;
    for (std::size_t l = 0; l < s.layers; ++l) {
      trunk.push_back(add(in, s.hidden));
      in = s.hidden;
    }
    head_rt = add(in, s.k_rt);
    head_bw = add(in, s.k_bw);
    value = add(in, 1);
  }

 private:
  Dense add(std::size_t in, std::size_t out) {
    Dense d{in, out, total, total + in * out};
    total += in * out + out;
    return d;
  }
};

// Actor-critic weights: tanh trunk, two categorical heads, scalar value head.
struct PolicyParams {
  NetShape shape;
  std::vector<double> theta;

  PolicyParams() = default;
  explicit PolicyParams(const NetShape& s) : shape(s), theta(Layout(s).total, 0.0) {}

  std::size_t size() const { return theta.size(); }
  bool all_finite() const {
    for (double v : theta)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline PolicyParams init_params(const NetShape& s, std::uint64_t seed) {
  PolicyParams p(s);
  const Layout lay(s);
  std::mt19937_64 rng(seed);
  auto fill = [&](const Layout::Dense& d, double gain) {
    std::normal_distribution<double> n(0.0, gain / std::sqrt(static_cast<double>(d.in)));
    for (std::size_t i = 0; i < d.in * d.out; ++i) p.theta[d.w + i] = n(rng);
  };
  for (const auto& d : lay.trunk) fill(d, 1.0);
  fill(lay.head_rt, 0.01);
  fill(lay.head_bw, 0.01);
  fill(lay.value, 1.0);
  return p;
}

struct PolicyOutput {
  std::vector<double> logits_rt;
  std::vector<double> logits_bw;
  double value = 0;
};

// Hidden activations kept for the backward pass; acts[0] is the input.
struct ForwardCache {
  std::vector<std::vector<double>> acts;
};

namespace detail {
inline void dense(const std::vector<double>& th, const Layout::Dense& d, const double* x, double* y) {
  for (std::size_t o = 0; o < d.out; ++o) {
    const double* w = th.data() + d.w + o * d.in;
    double acc = th[d.b + o];
    for (std::size_t i = 0; i < d.in; ++i) acc += w[i] * x[i];
    y[o] = acc;
  }
}
}  // namespace detail

inline PolicyOutput forward(const PolicyParams& p, const std::vector<double>& state, ForwardCache* cache = nullptr) {
  if (state.size() != p.shape.input_dim)
    throw std::invalid_argument("state dimension " + std::to_string(state.size()) + " != network input " +
                                std::to_string(p.shape.input_dim));
  const Layout lay(p.shape);
  std::vector<std::vector<double>> local;
  auto& acts = cache ? cache->acts : local;
  acts.assign(1, state);
  for (const auto& d : lay.trunk) {
    std::vector<double> h(d.out);
    detail::dense(p.theta, d, acts.back().data(), h.data());
    for (double& v : h) v = std::tanh(v);
    acts.push_back(std::move(h));
  }
  const double* top = acts.back().data();
  PolicyOutput out;
  out.logits_rt.resize(lay.head_rt.out);
  out.logits_bw.resize(lay.head_bw.out);
  detail::dense(p.theta, lay.head_rt, top, out.logits_rt.data());
  detail::dense(p.theta, lay.head_bw, top, out.logits_bw.data());
  detail::dense(p.theta, lay.value, top, &out.value);
  return out;
}

// Accumulates into `grad` the parameter gradient for upstream derivatives of
// one sample's outputs.
inline void backward(const PolicyParams& p, const ForwardCache& cache, const std::vector<double>& d_rt,
                     const std::vector<double>& d_bw, double d_value, std::vector<double>& grad) {
  const Layout lay(p.shape);
  if (grad.size() != p.theta.size()) grad.assign(p.theta.size(), 0.0);
  const auto& th = p.theta;
  const std::vector<double>& top = cache.acts.back();
  std::vector<double> d_top(top.size(), 0.0);

  auto head = [&](const Layout::Dense& d, const double* dy) {
    for (std::size_t o = 0; o < d.out; ++o) {
      if (dy[o] == 0.0) continue;
      grad[d.b + o] += dy[o];
      const std::size_t row = d.w + o * d.in;
      for (std::size_t i = 0; i < d.in; ++i) {
        grad[row + i] += dy[o] * top[i];
        d_top[i] += dy[o] * th[row + i];
      }
    }
  };
  head(lay.head_rt, d_rt.data());
  head(lay.head_bw, d_bw.data());
  head(lay.value, &d_value);

  std::vector<double> d_h = std::move(d_top);
  for (std::size_t l = lay.trunk.size(); l-- > 0;) {
    const auto& d = lay.trunk[l];
    const auto& h = cache.acts[l + 1];
    const auto& x = cache.acts[l];
    std::vector<double> d_x(d.in, 0.0);
    for (std::size_t o = 0; o < d.out; ++o) {
      const double dz = d_h[o] * (1.0 - h[o] * h[o]);
      if (dz == 0.0) continue;
      grad[d.b + o] += dz;
      const std::size_t row = d.w + o * d.in;
      for (std::size_t i = 0; i < d.in; ++i) {
        grad[row + i] += dz * x[i];
        d_x[i] += dz * th[row + i];
      }
    }
    d_h = std::move(d_x);
  }
}

}  // namespace bbrtune::rl
