#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "bbrtune/rl/hyper.hpp"
#include "bbrtune/rl/policy.hpp"

namespace bbrtune::rl {

struct Checkpoint {
  PolicyParams params;
  PpoHyper hyper;
  std::uint64_t seed = 0;
  std::uint64_t iteration = 0;
};

inline constexpr std::array<char, 8> kCheckpointMagic = {'B', 'B', 'R', 'T', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {
inline void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}
inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}
inline void put_f64(std::ostream& os, double d) {
  std::uint64_t u;
  std::memcpy(&u, &d, 8);
  put_u64(os, u);
}
inline double get_f64(std::istream& is) {
  const std::uint64_t u = get_u64(is);
  double d;
  std::memcpy(&d, &u, 8);
  return d;
}
}  // namespace detail

// Little-endian binary dump; doubles are stored as raw IEEE-754 bits so a
// reload reproduces forward() exactly.
inline void save_checkpoint(std::ostream& os, const Checkpoint& c) {
  using namespace detail;
  os.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  put_u64(os, kCheckpointVersion);
  const auto& s = c.params.shape;
  for (std::size_t v : {s.input_dim, s.hidden, s.layers, s.k_rt, s.k_bw}) put_u64(os, v);
  const auto& h = c.hyper;
  for (double v : {h.gamma, h.lambda, h.clip_eps, h.c1, h.c2, h.beta_entropy, h.learning_rate, h.max_grad_norm})
    put_f64(os, v);
  for (std::size_t v : {h.epochs, h.minibatch, h.n_actors, h.horizon}) put_u64(os, v);
  put_u64(os, h.normalize_advantages ? 1 : 0);
  put_u64(os, c.seed);
  put_u64(os, c.iteration);
  put_u64(os, c.params.theta.size());
  for (double v : c.params.theta) put_f64(os, v);
  if (!os) throw std::runtime_error("checkpoint write failed");
}

inline Checkpoint load_checkpoint(std::istream& is) {
  using namespace detail;
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kCheckpointMagic)
    throw std::runtime_error("not a checkpoint file");
  if (get_u64(is) != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version");
  Checkpoint c;
  NetShape s;
  s.input_dim = get_u64(is);
  s.hidden = get_u64(is);
  s.layers = get_u64(is);
  s.k_rt = get_u64(is);
  s.k_bw = get_u64(is);
  auto& h = c.hyper;
  for (double* v : {&h.gamma, &h.lambda, &h.clip_eps, &h.c1, &h.c2, &h.beta_entropy, &h.learning_rate,
                    &h.max_grad_norm})
    *v = get_f64(is);
  for (std::size_t* v : {&h.epochs, &h.minibatch, &h.n_actors, &h.horizon}) *v = get_u64(is);
  h.normalize_advantages = get_u64(is) != 0;
  c.seed = get_u64(is);
  c.iteration = get_u64(is);
  c.params = PolicyParams(s);
  if (get_u64(is) != c.params.theta.size()) throw std::runtime_error("checkpoint parameter count mismatch");
  for (double& v : c.params.theta) v = get_f64(is);
  return c;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  save_checkpoint(f, c);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  return load_checkpoint(f);
}

}  // namespace bbrtune::rl
