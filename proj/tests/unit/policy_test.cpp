#include <gtest/gtest.h>

#include <sstream>

#include "bbrtune/rl/adam.hpp"
#include "bbrtune/rl/checkpoint.hpp"
#include "bbrtune/rl/gae.hpp"
#include "bbrtune/rl/loss.hpp"
#include "gen.hpp"
#include "oracles.hpp"

using namespace bbrtune;
using namespace bbrtune::rl;
using check::Gen;

namespace {

NetShape small_shape(std::size_t in = 9) {
  NetShape s;
  s.input_dim = in;
  s.hidden = 16;
  return s;
}

double value_bound(const PolicyParams& p) {
  const Layout lay(p.shape);
  double b = std::abs(p.theta[lay.value.b]);
  for (std::size_t i = 0; i < lay.value.in; ++i) b += std::abs(p.theta[lay.value.w + i]);
  return b;
}

}  // namespace

TEST(Policy, ZeroWeightsGiveUniformHeadsAndZeroValue) {
  const PolicyParams p(small_shape());
  const auto out = forward(p, std::vector<double>(9, 0.3));
  for (double z : out.logits_rt) EXPECT_EQ(z, 0.0);
  for (double z : out.logits_bw) EXPECT_EQ(z, 0.0);
  EXPECT_EQ(out.value, 0.0);
  for (double q : softmax(out.logits_rt)) EXPECT_NEAR(q, 0.2, 1e-15);
}

TEST(Policy, ForwardIsPureAndValueBounded) {
  Gen g(11);
  for (int k = 0; k < 200; ++k) {
    const auto p = check::random_params(g, small_shape(), 1.0);
    const auto s = g.vec(9, -5, 5);
    const auto a = forward(p, s), b = forward(p, s);
    ASSERT_EQ(a.logits_rt, b.logits_rt);
    ASSERT_EQ(a.logits_bw, b.logits_bw);
    ASSERT_EQ(a.value, b.value);
    ASSERT_LE(std::abs(a.value), value_bound(p));
  }
}

TEST(Policy, DimensionMismatchThrows) {
  const PolicyParams p(small_shape());
  EXPECT_THROW(forward(p, std::vector<double>(8, 0.0)), std::invalid_argument);
}

TEST(Categorical, UniformHeadsHaveMaximalEntropy) {
  std::mt19937_64 rng(1);
  const auto a = sample_action(std::vector<double>(5, 0.0), std::vector<double>(5, 0.0), rng);
  EXPECT_NEAR(a.entropy, 2 * std::log(5.0), 1e-12);
  EXPECT_NEAR(a.log_prob, -2 * std::log(5.0), 1e-12);
}

TEST(Categorical, DominantLogitIsDeterministic) {
  std::mt19937_64 rng(2);
  const std::vector<double> rt = {-1e6, -1e6, 1e6, -1e6, -1e6}, bw = {1e6, -1e6, -1e6, -1e6, -1e6};
  for (int k = 0; k < 1000; ++k) {
    const auto a = sample_action(rt, bw, rng);
    ASSERT_EQ(a.i_rt, 2u);
    ASSERT_EQ(a.i_bw, 0u);
    ASSERT_NEAR(a.entropy, 0.0, 1e-12);
    ASSERT_NEAR(a.log_prob, 0.0, 1e-12);
  }
}

TEST(Categorical, SampleFrequenciesMatchSoftmax) {
  std::mt19937_64 rng(3);
  const std::vector<double> z = {0.5, -1.0, 2.0, 0.0, 1.0};
  const auto probs = softmax(z);
  const int n = 100000;
  std::vector<int> count(5, 0);
  for (int k = 0; k < n; ++k) ++count[sample_index(probs, rng)];
  for (std::size_t i = 0; i < 5; ++i) {
    const double sd = std::sqrt(n * probs[i] * (1 - probs[i]));
    EXPECT_NEAR(count[i], n * probs[i], 3 * sd) << "arm " << i;
  }
}

TEST(Categorical, SoftmaxNormalizedAndEntropyBounded) {
  Gen g(4);
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = 1 + g.index(8);
    const auto z = g.vec(n, -50, 50);
    double sum = 0;
    for (double q : softmax(z)) sum += q;
    ASSERT_NEAR(sum, 1.0, 1e-12);
    const double h = entropy_from_log(log_softmax(z));
    ASSERT_GE(h, -1e-12);
    ASSERT_LE(h, std::log(static_cast<double>(n)) + 1e-12);
  }
}

TEST(Gae, WorkedExample) {
  const auto e = compute_gae({1.0, 2.0}, {0.5, 1.0, 0.0}, {false, false}, 0.9, 0.5);
  EXPECT_NEAR(e.advantages[0], 1.85, 1e-12);
  EXPECT_NEAR(e.advantages[1], 1.0, 1e-12);
  EXPECT_NEAR(e.v_targets[0], 2.35, 1e-12);
  EXPECT_NEAR(e.v_targets[1], 2.0, 1e-12);
}

TEST(Gae, RecursionMatchesClosedForm) {
  Gen g(5);
  for (int k = 0; k < 1000; ++k) {
    const std::size_t T = 1 + g.index(64);
    const auto r = g.vec(T, -10, 10), v = g.vec(T + 1, -10, 10);
    const double gamma = g.uniform(0, 1), lambda = g.uniform(0, 1);
    const auto got = compute_gae(r, v, std::vector<bool>(T, false), gamma, lambda).advantages;
    const auto want = check::gae_closed_form(r, v, gamma, lambda);
    for (std::size_t t = 0; t < T; ++t) ASSERT_NEAR(got[t], want[t], 1e-9) << "instance " << k << " t " << t;
  }
}

TEST(Gae, DoneCutsBootstrapAndTrace) {
  // Episode boundary after step 0: advantage 0 is just r0 - V0.
  const auto e = compute_gae({1.0, 2.0}, {0.5, 1.0, 3.0}, {true, false}, 0.9, 0.5);
  EXPECT_NEAR(e.advantages[0], 0.5, 1e-12);
  EXPECT_NEAR(e.advantages[1], 2.0 + 0.9 * 3.0 - 1.0, 1e-12);
}

TEST(Gae, GammaLambdaZeroIsOneStepTd) {
  Gen g(6);
  const auto r = g.vec(10, -1, 1), v = g.vec(11, -1, 1);
  const auto e = compute_gae(r, v, std::vector<bool>(10, false), 0.0, 0.0);
  for (std::size_t t = 0; t < 10; ++t) EXPECT_NEAR(e.advantages[t], r[t] - v[t], 1e-15);
}

TEST(Surrogate, ClipExamples) {
  EXPECT_DOUBLE_EQ(clipped_surrogate(1.5, 1.0, 0.2), 1.2);
  EXPECT_DOUBLE_EQ(clipped_surrogate(0.5, -1.0, 0.2), -0.8);
  EXPECT_DOUBLE_EQ(clipped_surrogate(0.5, 1.0, 0.2), 0.5);
  EXPECT_DOUBLE_EQ(clipped_surrogate(1.5, -1.0, 0.2), -1.5);
  EXPECT_DOUBLE_EQ(clipped_surrogate(1.1, 2.0, 0.2), 2.2);
}

TEST(Surrogate, NeverExceedsUnclippedAndBoundedGain) {
  Gen g(7);
  for (int k = 0; k < 10000; ++k) {
    const double ratio = g.uniform(0, 3), adv = g.normal(2), eps = g.uniform(0.01, 0.9);
    const double s = clipped_surrogate(ratio, adv, eps);
    ASSERT_LE(s, ratio * adv + 1e-12);
    if (adv > 0) {
      ASSERT_LE(s, (1 + eps) * adv + 1e-12);
    }
  }
}

TEST(Loss, TermsAtZeroWeights) {
  const PolicyParams p(small_shape(1));
  PpoHyper h;
  h.normalize_advantages = false;
  Batch b;
  const double lp = -2 * std::log(5.0);
  for (int i = 0; i < 4; ++i) {
    b.states.push_back({static_cast<double>(i)});
    b.i_rt.push_back(static_cast<std::size_t>(i));
    b.i_bw.push_back(0);
    b.old_log_prob.push_back(lp);
    b.advantages.push_back(i + 1.0);
    b.v_targets.push_back(0.0);
  }
  const auto r = total_loss(p, b, h, false);
  EXPECT_NEAR(r.surrogate, 2.5, 1e-12);
  EXPECT_NEAR(r.value_loss, 0.0, 1e-15);
  EXPECT_NEAR(r.entropy, 2 * std::log(5.0), 1e-12);
  EXPECT_NEAR(r.clip_fraction, 0.0, 1e-15);
  EXPECT_NEAR(r.loss, -2.5 - h.c2 * h.beta_entropy * 2 * std::log(5.0), 1e-12);
}

TEST(Loss, EmptyBatchThrows) {
  EXPECT_THROW(total_loss(PolicyParams(small_shape()), Batch{}, PpoHyper{}), std::invalid_argument);
}

TEST(Loss, GradientMatchesFiniteDifferences) {
  Gen g(8);
  PpoHyper h;
  double worst = 0;
  std::size_t checked = 0;
  for (int k = 0; k < 20; ++k) {
    const auto p = check::random_params(g, small_shape(), 0.3);
    const auto b = check::random_batch(g, p, 16, h.clip_eps);
    const auto res = check::finite_difference_check(p, b, h, check::coords_per_layer(g, p.shape, 4));
    worst = std::max(worst, res.max_rel_error);
    checked += res.checked;
  }
  EXPECT_GT(checked, 0u);
  EXPECT_LT(worst, 1e-4);
}

TEST(Loss, GradientWithConsensusPenaltyMatchesFiniteDifferences) {
  Gen g(9);
  PpoHyper h;
  for (int k = 0; k < 5; ++k) {
    const auto p = check::random_params(g, small_shape(), 0.3);
    const auto b = check::random_batch(g, p, 8, h.clip_eps);
    std::vector<std::vector<double>> probes;
    for (int s = 0; s < 6; ++s) probes.push_back(g.vec(9, -1, 1));
    ValuePenalty pen;
    pen.probes = &probes;
    pen.kappa = 0.7;
    pen.neighbor_values = {g.vec(6, -1, 1), g.vec(6, -1, 1)};
    const auto res = check::finite_difference_check(p, b, h, check::coords_per_layer(g, p.shape, 4), 1e-4, &pen);
    EXPECT_LT(res.max_rel_error, 1e-4) << "instance " << k;
  }
}

TEST(Loss, ValueHeadGradientVanishesAtTarget) {
  Gen g(10);
  PpoHyper h;
  h.c2 = 0;
  auto p = check::random_params(g, small_shape(), 0.3);
  auto b = check::random_batch(g, p, 8, h.clip_eps);
  for (std::size_t i = 0; i < b.size(); ++i) b.v_targets[i] = forward(p, b.states[i]).value;
  const auto grad = total_loss(p, b, h).grad;
  const Layout lay(p.shape);
  for (std::size_t i = 0; i < lay.value.in; ++i) EXPECT_EQ(grad[lay.value.w + i], 0.0);
  EXPECT_EQ(grad[lay.value.b], 0.0);
}

TEST(Loss, PolicyGradientIsLinearInAdvantage) {
  Gen g(12);
  PpoHyper h;
  h.c1 = 0;
  h.c2 = 0;
  h.normalize_advantages = false;
  auto p = check::random_params(g, small_shape(), 0.3);
  auto b = check::random_batch(g, p, 8, h.clip_eps);
  // Ratios inside the clip range so the surrogate is linear in the advantage.
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto out = forward(p, b.states[i]);
    b.old_log_prob[i] = log_softmax(out.logits_rt)[b.i_rt[i]] + log_softmax(out.logits_bw)[b.i_bw[i]];
  }
  auto b2 = b;
  for (double& a : b2.advantages) a *= 3.0;
  const auto g1 = total_loss(p, b, h).grad, g3 = total_loss(p, b2, h).grad;
  for (std::size_t i = 0; i < g1.size(); ++i) ASSERT_NEAR(g3[i], 3.0 * g1[i], 1e-12 + 1e-9 * std::abs(g1[i]));
}

TEST(Adam, FirstStepMovesByLearningRateAgainstGradientSign) {
  Adam opt(3, 0.01);
  std::vector<double> theta = {1.0, 1.0, 1.0};
  opt.step(theta, {2.0, -0.5, 0.0});
  EXPECT_NEAR(theta[0], 0.99, 1e-9);
  EXPECT_NEAR(theta[1], 1.01, 1e-9);
  EXPECT_DOUBLE_EQ(theta[2], 1.0);
}

TEST(Adam, MinimizesAQuadratic) {
  Adam opt(2, 0.05);
  std::vector<double> x = {3.0, -2.0};
  for (int k = 0; k < 2000; ++k) opt.step(x, {2 * (x[0] - 1), 2 * (x[1] + 1)});
  EXPECT_NEAR(x[0], 1.0, 1e-3);
  EXPECT_NEAR(x[1], -1.0, 1e-3);
}

TEST(Adam, GradientClippingScalesToMaxNorm) {
  std::vector<double> g = {3.0, 4.0};
  EXPECT_DOUBLE_EQ(clip_grad_norm(g, 1.0), 5.0);
  EXPECT_NEAR(g[0], 0.6, 1e-15);
  EXPECT_NEAR(g[1], 0.8, 1e-15);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Gen g(13);
  Checkpoint c;
  c.params = check::random_params(g, small_shape(), 1.0);
  c.hyper.learning_rate = 1.2345e-4;
  c.seed = 77;
  c.iteration = 500;
  std::stringstream ss;
  save_checkpoint(ss, c);
  const auto back = load_checkpoint(ss);
  EXPECT_EQ(back.params.theta, c.params.theta);
  EXPECT_TRUE(back.params.shape == c.params.shape);
  EXPECT_EQ(back.hyper.learning_rate, c.hyper.learning_rate);
  EXPECT_EQ(back.seed, 77u);
  EXPECT_EQ(back.iteration, 500u);
  const auto s = g.vec(9, -1, 1);
  EXPECT_EQ(forward(back.params, s).value, forward(c.params, s).value);
}

TEST(Checkpoint, RejectsBadMagicAndTruncation) {
  Checkpoint c;
  c.params = PolicyParams(small_shape());
  std::stringstream ss;
  save_checkpoint(ss, c);
  const std::string bytes = ss.str();
  std::string bad = bytes;
  bad[0] = 'X';
  std::stringstream s1(bad);
  EXPECT_THROW(load_checkpoint(s1), std::runtime_error);
  std::stringstream s2(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(load_checkpoint(s2), std::runtime_error);
}
