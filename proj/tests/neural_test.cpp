#include <gtest/gtest.h>

#include <cmath>

#include "rlabo/neural.hpp"
#include "test_support.hpp"

using namespace rlabo;
using rlabo::testing::rel_err;

namespace {

PolicyParams random_params(Rng& rng, double scale = 0.5) {
  PolicyParams p = PolicyParams::zeros(4);
  Eigen::VectorXd theta(static_cast<Eigen::Index>(p.size()));
  for (auto& v : theta) v = rng.uniform(-scale, scale);
  p.assign(theta);
  return p;
}

Eigen::MatrixXd random_states(Rng& rng, int cols) {
  Eigen::MatrixXd s(4, cols);
  for (auto& v : s.reshaped()) v = rng.uniform(-2.0, 2.0);
  return s;
}

}  // namespace

TEST(Mlp, ZeroParametersGiveUniformPolicyAndZeroValue) {
  const PolicyParams p = PolicyParams::zeros(4);
  const Eigen::VectorXd s = Eigen::VectorXd::Constant(4, 0.3);
  const Eigen::VectorXd probs = actor_forward(p, s);
  for (int k = 0; k < 5; ++k) EXPECT_DOUBLE_EQ(probs[k], 0.2);
  EXPECT_EQ(critic_forward(p, s), 0.0);
}

TEST(Mlp, ArchitectureSizes) {
  const PolicyParams p = PolicyParams::zeros(4);
  EXPECT_EQ(p.actor.parameter_count(), 4u * 64 + 64 + 64 * 64 + 64 + 64 * 5 + 5);
  EXPECT_EQ(p.critic.parameter_count(), 4u * 64 + 64 + 64 * 64 + 64 + 64 + 1);
  EXPECT_EQ(p.size(), p.actor.parameter_count() + p.critic.parameter_count());
}

TEST(Mlp, ProbabilitiesFormADistribution) {
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const PolicyParams p = random_params(rng, 2.0);
    const Eigen::MatrixXd probs = actor_forward_batch(p, random_states(rng, 8));
    for (Eigen::Index j = 0; j < probs.cols(); ++j) {
      EXPECT_NEAR(probs.col(j).sum(), 1.0, 1e-12);
      EXPECT_GE(probs.col(j).minCoeff(), 0.0);
    }
  }
}

TEST(Mlp, InitializationIsNearUniform) {
  Rng rng(3);
  const PolicyParams p = PolicyParams::initialize(4, rng);
  const Eigen::VectorXd probs = actor_forward(p, Eigen::VectorXd::Constant(4, 0.5));
  for (int k = 0; k < 5; ++k) EXPECT_NEAR(probs[k], 0.2, 0.01);
  EXPECT_NEAR(critic_forward(p, Eigen::VectorXd::Constant(4, 0.5)), 0.0, 0.05);
}

TEST(Mlp, RejectsBadStates) {
  const PolicyParams p = PolicyParams::zeros(4);
  EXPECT_THROW(actor_forward(p, Eigen::VectorXd::Zero(3)), std::invalid_argument);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(4);
  s[2] = std::nan("");
  EXPECT_THROW(actor_forward(p, s), std::invalid_argument);
  EXPECT_THROW(critic_forward(p, s), std::invalid_argument);
}

TEST(Backprop, MatchesCentralDifferences) {
  Rng rng(7);
  for (int draw = 0; draw < 30; ++draw) {
    PolicyParams p = random_params(rng);
    const Eigen::MatrixXd s = random_states(rng, 3);
    Eigen::MatrixXd ca(5, 3), cc(1, 3);
    for (auto& v : ca.reshaped()) v = rng.uniform(-1.0, 1.0);
    for (auto& v : cc.reshaped()) v = rng.uniform(-1.0, 1.0);
    // Scalar probe: sum of weighted logits plus weighted values.
    auto loss = [&](const PolicyParams& q) {
      return (ca.array() * q.actor.forward(s).array()).sum() +
             (cc.array() * q.critic.forward(s).array()).sum();
    };
    const Eigen::VectorXd g = backprop(p, s, ca, cc).flatten();
    Eigen::VectorXd theta = p.flatten();
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      const double fd = rlabo::testing::central_difference(p, theta, i, [&] { return loss(p); });
      ASSERT_LT(rel_err(g[i], fd, 1e-6), 1e-4) << "draw " << draw << " param " << i;
    }
    p.assign(theta);
  }
}

TEST(Backprop, AdditiveOverBatchColumns) {
  Rng rng(8);
  const PolicyParams p = random_params(rng);
  const Eigen::MatrixXd s = random_states(rng, 2);
  Eigen::MatrixXd ca = Eigen::MatrixXd::Random(5, 2), cc = Eigen::MatrixXd::Random(1, 2);
  const Eigen::VectorXd both = backprop(p, s, ca, cc).flatten();
  const Eigen::VectorXd first = backprop(p, s.col(0), ca.col(0), cc.col(0)).flatten();
  const Eigen::VectorXd second = backprop(p, s.col(1), ca.col(1), cc.col(1)).flatten();
  EXPECT_LT((both - first - second).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Backprop, RejectsShapeMismatch) {
  const PolicyParams p = PolicyParams::zeros(4);
  EXPECT_THROW(backprop(p, Eigen::MatrixXd::Zero(4, 2), Eigen::MatrixXd::Zero(5, 3),
                        Eigen::MatrixXd::Zero(1, 2)),
               std::invalid_argument);
}

TEST(Sampling, UniformFrequencies) {
  Rng rng(11);
  const Eigen::VectorXd probs = Eigen::VectorXd::Constant(5, 0.2);
  std::array<int, 5> counts{};
  for (int i = 0; i < 10000; ++i) ++counts[static_cast<std::size_t>(sample_action(probs, rng))];
  for (int c : counts) {
    EXPECT_GE(c / 10000.0, 0.17);
    EXPECT_LE(c / 10000.0, 0.23);
  }
}

TEST(Sampling, NeverPicksZeroProbabilityActions) {
  Rng rng(12);
  Eigen::VectorXd probs(5);
  probs << 0.0, 0.5, 0.0, 0.5, 0.0;
  for (int i = 0; i < 2000; ++i) {
    const int a = sample_action(probs, rng);
    EXPECT_TRUE(a == 1 || a == 3);
  }
}

TEST(Sampling, ArgmaxBreaksTiesLow) {
  Eigen::VectorXd probs(5);
  probs << 0.1, 0.3, 0.3, 0.2, 0.1;
  EXPECT_EQ(argmax_action(probs), 1);
  EXPECT_EQ(argmax_action(Eigen::VectorXd::Constant(5, 0.2)), 0);
}

TEST(Params, FlattenAssignRoundTrip) {
  Rng rng(13);
  const PolicyParams p = PolicyParams::initialize(4, rng);
  PolicyParams q = PolicyParams::zeros(4);
  q.assign(p.flatten());
  EXPECT_TRUE(p == q);
  EXPECT_THROW(q.assign(Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST(Adam, ZeroLearningRateLeavesParametersUnchanged) {
  Eigen::VectorXd theta = Eigen::VectorXd::LinSpaced(10, -1.0, 1.0);
  const Eigen::VectorXd before = theta;
  Adam adam(10, {0.0, 0.9, 0.999, 1e-8});
  for (int i = 0; i < 5; ++i) adam.step(theta, Eigen::VectorXd::Ones(10));
  EXPECT_EQ(theta, before);
}

TEST(Adam, FirstStepMovesByLearningRateAgainstGradientSign) {
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(3);
  Adam adam(3, {0.1, 0.9, 0.999, 1e-8});
  Eigen::VectorXd g(3);
  g << 2.0, -0.5, 0.0;
  adam.step(theta, g);
  EXPECT_NEAR(theta[0], -0.1, 1e-8);
  EXPECT_NEAR(theta[1], 0.1, 1e-8);
  EXPECT_EQ(theta[2], 0.0);
}

TEST(Adam, MinimizesQuadratic) {
  Eigen::VectorXd theta = Eigen::VectorXd::Constant(4, 3.0);
  Adam adam(4, {0.05, 0.9, 0.999, 1e-8});
  for (int i = 0; i < 2000; ++i) adam.step(theta, 2.0 * theta);
  EXPECT_LT(theta.norm(), 1e-2);
}
