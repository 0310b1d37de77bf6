#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "brs/core/estimators.hpp"
#include "brs/core/game.hpp"
#include "brs/core/returns.hpp"
#include "brs/core/trajectory_io.hpp"
#include "brs/ipd/ipd.hpp"

using namespace brs;

namespace {

double pow_sum(const std::vector<double>& r, double gamma, std::size_t from = 0) {
  double acc = 0.0;
  for (std::size_t k = from; k < r.size(); ++k) acc += std::pow(gamma, static_cast<double>(k - from)) * r[k];
  return acc;
}

std::vector<double> random_vector(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

}  // namespace

TEST(Returns, DiscountedReturnMatchesPowerSum) {
  Rng rng(3);
  for (double gamma : {0.0, 0.5, 0.96, 1.0}) {
    const auto r = random_vector(17, rng);
    EXPECT_NEAR(discounted_return(r, gamma), pow_sum(r, gamma), 1e-12);
  }
  EXPECT_EQ(discounted_return(std::vector<double>{}, 0.9), 0.0);
}

TEST(Returns, RewardToGoIncludesDiscountedBootstrap) {
  const std::vector<double> r{1.0, -2.0, 0.5};
  const auto g = reward_to_go(r, 0.9, 10.0);
  for (std::size_t t = 0; t < r.size(); ++t) {
    EXPECT_NEAR(g[t], pow_sum(r, 0.9, t) + std::pow(0.9, static_cast<double>(r.size() - t)) * 10.0, 1e-12);
  }
}

TEST(Returns, GaeWithLambdaOneIsMonteCarloAdvantage) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto r = random_vector(12, rng);
    const auto v = random_vector(12, rng);
    const double boot = normal(rng);
    const auto adv = gae_advantages(r, v, boot, 0.96, 1.0);
    const auto g = reward_to_go(r, 0.96, boot);
    for (std::size_t t = 0; t < r.size(); ++t) EXPECT_NEAR(adv[t], g[t] - v[t], 1e-12);
  }
}

TEST(Returns, GaeWithLambdaZeroIsTdError) {
  const std::vector<double> r{1.0, 2.0, 3.0};
  const std::vector<double> v{0.5, -1.0, 2.0};
  const auto adv = gae_advantages(r, v, 4.0, 0.9, 0.0);
  EXPECT_NEAR(adv[0], 1.0 + 0.9 * -1.0 - 0.5, 1e-12);
  EXPECT_NEAR(adv[1], 2.0 + 0.9 * 2.0 + 1.0, 1e-12);
  EXPECT_NEAR(adv[2], 3.0 + 0.9 * 4.0 - 2.0, 1e-12);
}

TEST(Returns, GaeRejectsBadInputs) {
  const std::vector<double> r{1.0, 2.0};
  const std::vector<double> v{1.0};
  EXPECT_THROW(gae_advantages(r, v, 0.0, 0.9, 1.0), ConfigError);
  EXPECT_THROW(gae_advantages(r, r, 0.0, 0.9, 1.5), ConfigError);
}

TEST(Estimators, MagicBoxEvaluatesToOneAndDifferentiatesLikeItsArgument) {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    ad::Matrix x0(3, 1);
    for (int i = 0; i < 3; ++i) x0(i) = 4.0 * normal(rng);
    auto x = ad::parameter(x0);
    auto box = magic_box(ad::sum(x));
    EXPECT_EQ(box.item(), 1.0);
    ad::backward(box);
    for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(x.grad()(i), 1.0);
  }
}

TEST(Estimators, ReinforceSurrogateGradientIsWeightedScore) {
  ad::Matrix lp0(2, 3);
  lp0 << -0.1, -0.2, -0.3, -1.0, -2.0, -0.5;
  auto lp = ad::parameter(lp0);
  ad::Matrix w(2, 1);
  w << 2.0, -1.0;
  auto s = reinforce_surrogate(lp, w, 0.5, Reduction::Mean);
  ad::backward(s);
  for (int j = 0; j < 3; ++j) {
    EXPECT_DOUBLE_EQ(lp.grad()(0, j), (2.0 - 0.5) / 2.0);
    EXPECT_DOUBLE_EQ(lp.grad()(1, j), (-1.0 - 0.5) / 2.0);
  }
  auto sum = reinforce_surrogate(lp, w, 0.0, Reduction::Sum);
  EXPECT_NEAR(sum.item(), 2.0 * (-0.6) + -1.0 * (-3.5), 1e-12);
}

TEST(Estimators, ZeroReturnsAndZeroBaselineGiveZeroGradient) {
  auto lp = ad::parameter(ad::Matrix::Constant(4, 2, -0.7));
  auto s = reinforce_surrogate(lp, ad::Matrix::Zero(4, 1));
  ad::backward(s);
  EXPECT_EQ(lp.grad().norm(), 0.0);
}

TEST(Estimators, NonFiniteInputsAreNumericErrors) {
  EXPECT_THROW(reinforce_surrogate(ad::parameter(ad::Matrix::Constant(1, 1, std::nan(""))), ad::Matrix::Zero(1, 1)),
               NumericError);
  EXPECT_THROW(reinforce_surrogate(ad::parameter(ad::Matrix::Constant(1, 1, -1.0)),
                                   ad::Matrix::Constant(1, 1, std::numeric_limits<double>::infinity())),
               NumericError);
  auto ok = ad::parameter(ad::Matrix::Constant(2, 2, -1.0));
  EXPECT_THROW(reinforce_surrogate(ok, ad::Matrix::Zero(3, 1)), ConfigError);
}

TEST(Rollout, SameSeedReplaysBitForBit) {
  ipd::IpdEnv env({6, 0.9, {}});
  ipd::MemoryOneAgent a(ipd::MemoryOnePolicy{{0.3, 0.6, 0.2, 0.8, 0.5}}), b(ipd::MemoryOnePolicy{{0.7, 0.1, 0.9, 0.4, 0.5}});
  const auto t1 = rollout(env, a, b, 6, 42);
  const auto t2 = rollout(env, a, b, 6, 42);
  EXPECT_EQ(t1.actions, t2.actions);
  EXPECT_EQ(t1.rewards, t2.rewards);
  EXPECT_EQ(t1.log_probs, t2.log_probs);
  t1.validate();
}

TEST(Rollout, HorizonOutsideEpisodeIsAConfigError) {
  ipd::IpdEnv env({6, 1.0, {}});
  ipd::MemoryOneAgent a(ipd::MemoryOnePolicy::tit_for_tat()), b(ipd::MemoryOnePolicy::tit_for_tat());
  EXPECT_THROW(rollout(env, a, b, 7, 0), ConfigError);
  EXPECT_EQ(rollout(env, a, b, 0, 0).length(), 0u);
}

TEST(Summary, PerStepStderrIsUndefinedForOneEpisode) {
  const auto s = ipd::finite_ipd_game(ipd::MemoryOnePolicy::tit_for_tat(), ipd::MemoryOnePolicy::tit_for_tat(), 6,
                                      1.0, 1, 0);
  EXPECT_DOUBLE_EQ(s.discounted_return[0], -6.0);
  EXPECT_DOUBLE_EQ(s.per_step_mean_return[1], -1.0);
  EXPECT_TRUE(std::isnan(s.per_step_stderr[0]));
}

TEST(TrajectoryIo, JsonLinesRoundTrip) {
  ipd::IpdEnv env({4, 0.9, {}});
  ipd::MemoryOneAgent a(ipd::MemoryOnePolicy{{0.5, 0.5, 0.5, 0.5, 0.5}}), b(ipd::MemoryOnePolicy{{0.2, 0.9, 0.1, 0.6, 0.3}});
  std::vector<Trajectory> eps{rollout(env, a, b, 4, 1), rollout(env, a, b, 4, 2)};
  std::stringstream ss;
  write_jsonl(ss, eps, true);
  const auto back = read_jsonl(ss);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].actions, eps[i].actions);
    EXPECT_EQ(back[i].rewards, eps[i].rewards);
    EXPECT_EQ(back[i].observations, eps[i].observations);
    EXPECT_EQ(back[i].seed, eps[i].seed);
  }
}

TEST(Seeds, NamedStreamsAreIndependentAndStable) {
  EXPECT_EQ(derive_seed(1, "a", 0), derive_seed(1, "a", 0));
  EXPECT_NE(derive_seed(1, "a", 0), derive_seed(1, "b", 0));
  EXPECT_NE(derive_seed(1, "a", 0), derive_seed(1, "a", 1));
  EXPECT_NE(derive_seed(1, "a", 0), derive_seed(2, "a", 0));
}
