#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace bbrtune::rl {

struct PpoHyper {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip_eps = 0.2;
  double c1 = 0.5;
  double c2 = 0.01;
  double beta_entropy = 1.0;  // extra multiplier on the entropy bonus
  double learning_rate = 3e-3;
  std::size_t epochs = 4;
  std::size_t minibatch = 64;
  std::size_t n_actors = 4;
  std::size_t horizon = 128;
  double max_grad_norm = 0.5;  // <= 0 disables clipping
  bool normalize_advantages = true;

  void validate() const {
    if (!(gamma >= 0 && gamma <= 1)) throw std::invalid_argument("gamma must be in [0,1]");
    if (!(lambda >= 0 && lambda <= 1)) throw std::invalid_argument("lambda must be in [0,1]");
    if (!(clip_eps > 0 && clip_eps < 1)) throw std::invalid_argument("clip epsilon must be in (0,1)");
    if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw std::invalid_argument("learning rate must be > 0");
    if (!(c1 >= 0) || !(c2 >= 0) || !(beta_entropy >= 0)) throw std::invalid_argument("loss coefficients must be >= 0");
    if (epochs == 0 || minibatch == 0 || n_actors == 0 || horizon == 0)
      throw std::invalid_argument("epochs, minibatch, actors and horizon must be >= 1");
  }
};

}  // namespace bbrtune::rl
