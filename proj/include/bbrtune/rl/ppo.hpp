#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "bbrtune/rl/adam.hpp"
#include "bbrtune/rl/categorical.hpp"
#include "bbrtune/rl/gae.hpp"
#include "bbrtune/rl/hyper.hpp"
#include "bbrtune/rl/loss.hpp"
#include "bbrtune/rl/policy.hpp"
#include "bbrtune/rng.hpp"

namespace bbrtune::rl {

struct StepResult {
  std::vector<double> state;
  double reward = 0;
  bool done = false;
};

class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::size_t state_dim() const = 0;
  virtual std::vector<double> reset() = 0;
  virtual StepResult step(std::size_t i_rt, std::size_t i_bw) = 0;
};

struct IterationStats {
  std::size_t iteration = 0;
  double mean_reward = 0;
  double clip_fraction = 0;        // mean over every minibatch update
  double first_epoch_clip_fraction = 0;
  double entropy = 0;
  double value_loss = 0;
  double policy_loss = 0;
  double approx_kl = 0;
  double penalty = 0;
  std::size_t samples = 0;
  std::size_t episodes_finished = 0;
};

// Keeps an environment's episode running across iterations.
class RolloutWorker {
 public:
  RolloutWorker(Environment* env, std::uint64_t seed) : env_(env), rng_(seed) {
    if (!env_) throw std::invalid_argument("null environment");
  }

  Trajectory collect(const PolicyParams& p, std::size_t horizon, std::size_t* episodes_finished = nullptr) {
    Trajectory traj;
    traj.steps.reserve(horizon);
    for (std::size_t t = 0; t < horizon; ++t) {
      if (need_reset_) {
        state_ = env_->reset();
        need_reset_ = false;
      }
      const auto out = forward(p, state_);
      const auto a = sample_action(out.logits_rt, out.logits_bw, rng_);
      auto res = env_->step(a.i_rt, a.i_bw);
      Step s;
      s.state = std::move(state_);
      s.i_rt = a.i_rt;
      s.i_bw = a.i_bw;
      s.reward = res.reward;
      s.value = out.value;
      s.log_prob = a.log_prob;
      s.done = res.done;
      traj.steps.push_back(std::move(s));
      state_ = std::move(res.state);
      if (res.done) {
        need_reset_ = true;
        if (episodes_finished) ++*episodes_finished;
      }
    }
    traj.bootstrap_value = need_reset_ ? 0.0 : forward(p, state_).value;
    return traj;
  }

 private:
  Environment* env_;
  std::mt19937_64 rng_;
  std::vector<double> state_;
  bool need_reset_ = true;
};

inline Batch make_batch(const std::vector<Trajectory>& trajs, double gamma, double lambda) {
  Batch b;
  for (const auto& tr : trajs) {
    const auto est = compute_gae(tr, gamma, lambda);
    for (std::size_t t = 0; t < tr.size(); ++t) {
      const auto& s = tr.steps[t];
      b.states.push_back(s.state);
      b.i_rt.push_back(s.i_rt);
      b.i_bw.push_back(s.i_bw);
      b.old_log_prob.push_back(s.log_prob);
      b.advantages.push_back(est.advantages[t]);
      b.v_targets.push_back(est.v_targets[t]);
    }
  }
  return b;
}

inline double mean_reward(const std::vector<Trajectory>& trajs) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& tr : trajs)
    for (const auto& s : tr.steps) {
      sum += s.reward;
      ++n;
    }
  return n ? sum / static_cast<double>(n) : 0.0;
}

// Clipped-surrogate PPO with GAE over N actors. Rollouts run in actor order
// and every random stream is derived from the seed, so runs are reproducible.
class PpoTrainer {
 public:
  // Without environments the trainer only runs update() on externally collected batches.
  PpoTrainer(const NetShape& shape, PpoHyper hyper, std::uint64_t seed, std::vector<Environment*> envs = {})
      : hyper_(hyper),
        seed_(seed),
        params_(init_params(shape, derive_seed(seed, 0xC0FFEE))),
        adam_(params_.size(), hyper.learning_rate),
        shuffle_rng_(derive_seed(seed, 0x5EED)) {
    hyper_.validate();
    for (std::size_t i = 0; i < envs.size(); ++i) {
      if (envs[i]->state_dim() != shape.input_dim) throw std::invalid_argument("environment state size mismatch");
      workers_.emplace_back(envs[i], derive_seed(seed, 1000 + i));
    }
  }

  const PolicyParams& params() const { return params_; }
  PolicyParams& params() { return params_; }
  void set_params(const PolicyParams& p) {
    if (!(p.shape == params_.shape)) throw std::invalid_argument("parameter shape mismatch");
    params_ = p;
  }
  const PpoHyper& hyper() const { return hyper_; }
  void set_learning_rate(double lr) {
    hyper_.learning_rate = lr;
    adam_.set_learning_rate(lr);
  }
  std::size_t iteration() const { return iteration_; }
  std::uint64_t seed() const { return seed_; }

  std::vector<Trajectory> collect(std::size_t* episodes_finished = nullptr) {
    if (workers_.empty()) throw std::logic_error("trainer has no environments");
    std::vector<Trajectory> out;
    out.reserve(workers_.size());
    for (auto& w : workers_) out.push_back(w.collect(params_, hyper_.horizon, episodes_finished));
    return out;
  }

  // `epochs` passes of shuffled minibatch Adam steps on the negated objective.
  IterationStats update(const Batch& batch, const ValuePenalty* pen = nullptr) {
    IterationStats st;
    st.iteration = iteration_;
    st.samples = batch.size();
    if (batch.size() == 0) throw std::invalid_argument("empty batch");
    std::vector<std::size_t> idx(batch.size());
    std::size_t updates = 0;
    for (std::size_t e = 0; e < hyper_.epochs; ++e) {
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      std::shuffle(idx.begin(), idx.end(), shuffle_rng_);
      std::size_t epoch_updates = 0;
      double epoch_clip = 0;
      for (std::size_t start = 0; start < idx.size(); start += hyper_.minibatch) {
        const std::size_t end = std::min(idx.size(), start + hyper_.minibatch);
        const Batch mb = batch.select(std::vector<std::size_t>(idx.begin() + start, idx.begin() + end));
        auto r = total_loss(params_, mb, hyper_, true, pen);
        clip_grad_norm(r.grad, hyper_.max_grad_norm);
        adam_.step(params_.theta, r.grad);
        st.clip_fraction += r.clip_fraction;
        st.entropy += r.entropy;
        st.value_loss += r.value_loss;
        st.policy_loss += r.surrogate;
        st.approx_kl += r.approx_kl;
        st.penalty += r.penalty;
        epoch_clip += r.clip_fraction;
        ++updates;
        ++epoch_updates;
      }
      if (e == 0) st.first_epoch_clip_fraction = epoch_clip / static_cast<double>(epoch_updates);
    }
    const double inv = 1.0 / static_cast<double>(updates);
    st.clip_fraction *= inv;
    st.entropy *= inv;
    st.value_loss *= inv;
    st.policy_loss *= inv;
    st.approx_kl *= inv;
    st.penalty *= inv;
    ++iteration_;
    return st;
  }

  IterationStats iterate() {
    std::size_t episodes = 0;
    const auto trajs = collect(&episodes);
    auto st = update(make_batch(trajs, hyper_.gamma, hyper_.lambda));
    st.mean_reward = mean_reward(trajs);
    st.episodes_finished = episodes;
    return st;
  }

 private:
  PpoHyper hyper_;
  std::uint64_t seed_;
  PolicyParams params_;
  Adam adam_;
  std::mt19937_64 shuffle_rng_;
  std::vector<RolloutWorker> workers_;
  std::size_t iteration_ = 0;
};

}  // namespace bbrtune::rl
