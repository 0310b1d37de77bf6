#include <gtest/gtest.h>

#include <cmath>

#include "brs/detectives/agent_model.hpp"
#include "brs/detectives/detective_net.hpp"
#include "brs/ipd/exact.hpp"
#include "brs/ipd/ipd.hpp"
#include "brs/training/brs.hpp"
#include "brs/training/exact_gradients.hpp"
#include "brs/training/ipd_analytic.hpp"
#include "brs/training/ipd_tsd.hpp"
#include "brs/training/naive.hpp"
#include "brs/training/replay_buffer.hpp"
#include "oracles.hpp"

using namespace brs;
using ipd::IpdEnv;

namespace {

using brs::testing::all_joint_paths;
using brs::testing::discounted;
using brs::testing::live_detective;
using brs::testing::path_probability;
using brs::testing::random_matrix;
using brs::testing::tabular;

exact::Logits random_logits(int states, int actions, Rng& rng) { return random_matrix(states, actions, rng); }

}  // namespace

// --- replay buffer ---------------------------------------------------------

TEST(ReplayBuffer, FifoEvictionAndSize) {
  ReplayBuffer buf(3);
  for (int k = 1; k <= 5; ++k) {
    nn::ParameterVector p;
    p.add("x", ad::Matrix::Constant(1, 1, k));
    buf.push(p);
    EXPECT_EQ(buf.size(), static_cast<std::size_t>(std::min(k, 3)));
  }
  EXPECT_EQ(buf.at(0)["x"](0, 0), 3.0);
  EXPECT_EQ(buf.at(2)["x"](0, 0), 5.0);
}

TEST(ReplayBuffer, SamplingPerturbsCopiesOnly) {
  ReplayBuffer buf(4);
  nn::ParameterVector p;
  p.add("x", ad::Matrix::Zero(2, 2));
  buf.push(p);
  Rng rng(1);
  const auto s = buf.sample(8, 0.5, rng);
  EXPECT_EQ(s.size(), 8u);
  EXPECT_GT(s[0]["x"].norm(), 0.0);
  EXPECT_EQ(buf.at(0)["x"].norm(), 0.0);
  const auto z = buf.sample(2, 0.0, rng);
  EXPECT_EQ(z[1], p);
}

TEST(ReplayBuffer, EmptySampleAndZeroCapacityAreErrors) {
  ReplayBuffer buf(1);
  Rng rng(0);
  EXPECT_THROW(buf.sample(1, 0.1, rng), ConfigError);
  EXPECT_THROW(ReplayBuffer(0), ConfigError);
}

// --- agent and detective gradients ----------------------------------------

TEST(BrsGradient, TwoTermsMatchFiniteDifferencesOnOneStepGame) {
  IpdEnv env({1, 1.0, {}});
  const DetectiveSpec ds{5, 6, 6, 2, 2, 6, nn::Activation::Tanh};
  Rng rng(3);
  const auto det = live_detective(ds, rng);
  const auto agent = tabular(random_matrix(5, 2, rng));
  const QaConfig qa{1, 1, 1.0, false, QaMode::Enumerate};
  const auto check = brs::testing::two_term_check(env, TabularAgentModel{}, agent, det, ds, qa);
  EXPECT_LT(check.relative_error, 1e-3);
  EXPECT_GT(check.term2_norm, 1e-8);
}

TEST(BrsGradient, TwoTermsMatchFiniteDifferencesForRecurrentAgentOverTwoSteps) {
  IpdEnv env({2, 0.9, {}});
  const DetectiveSpec ds{5, 5, 4, 2, 2, 5, nn::Activation::Tanh};
  const GruAgentModel model{{5, 4, 3, 2, nn::Activation::Tanh}};
  Rng rng(5);
  const auto det = live_detective(ds, rng);
  const auto agent = model.init(rng);
  const QaConfig qa{1, 2, 0.9, true, QaMode::Enumerate};
  const auto check = brs::testing::two_term_check(env, model, agent, det, ds, qa);
  EXPECT_LT(check.relative_error, 1e-3);
  EXPECT_GT(check.term2_norm, 1e-8);
}

TEST(BrsGradient, DetectiveIgnoringQaGivesExactlyZeroSecondTerm) {
  IpdEnv env({2, 0.9, {}});
  const DetectiveSpec ds{5, 5, 4, 2, 2, 5, nn::Activation::Tanh};
  Rng rng(6);
  auto det = live_detective(ds, rng);
  det["trunk.l0.w"].bottomRows(ds.qa_dim).setZero();
  const auto agent = tabular(random_matrix(5, 2, rng));
  const QaConfig qa{8, 2, 0.9, true, QaMode::Sample};
  const auto b = rollout_vs_detective(env, TabularAgentModel{}, std::span<const nn::ParameterVector>(&agent, 1), det,
                                      ds, qa, 8, 1);
  const ad::Matrix w = random_matrix(8, 2, rng);
  const auto g = agent_gradients(env, TabularAgentModel{}, agent, det, ds, qa, b, w, std::nullopt, 0.0, true);
  EXPECT_EQ(g.term2.norm(), 0.0);
  EXPECT_GT(g.term1.norm(), 0.0);
}

TEST(BrsGradient, ZeroWeightsGiveNoUpdate) {
  IpdEnv env({2, 0.9, {}});
  const DetectiveSpec ds{5, 5, 4, 2, 2, 5, nn::Activation::Tanh};
  Rng rng(7);
  const auto det = live_detective(ds, rng);
  const auto agent = tabular(random_matrix(5, 2, rng));
  const QaConfig qa{4, 2, 0.9, true, QaMode::Sample};
  const auto b = rollout_vs_detective(env, TabularAgentModel{}, std::span<const nn::ParameterVector>(&agent, 1), det,
                                      ds, qa, 4, 2);
  const ad::Matrix w = ad::Matrix::Zero(4, 2);
  const auto g = agent_gradients(env, TabularAgentModel{}, agent, det, ds, qa, b, w, std::nullopt, 0.0, true);
  EXPECT_EQ(g.term1.norm(), 0.0);
  EXPECT_EQ(g.term2.norm(), 0.0);
  EXPECT_EQ(detective_gradient(det, ds, b, w, std::nullopt, 0.0).grad.norm(), 0.0);
}

TEST(BrsGradient, DetectiveGradientMatchesExactPolicyGradient) {
  IpdEnv env({2, 0.9, {}});
  const DetectiveSpec ds{5, 5, 4, 2, 2, 5, nn::Activation::Tanh};
  Rng rng(8);
  const auto det = live_detective(ds, rng);
  const auto agent = tabular(random_matrix(5, 2, rng));
  const QaConfig qa{1, 2, 0.9, true, QaMode::Enumerate};
  const ForcedActions forced = all_joint_paths(2);
  const int B = static_cast<int>(forced.size());
  auto value = [&](const nn::ParameterVector& d) {
    const auto b = rollout_vs_detective(env, TabularAgentModel{}, std::span<const nn::ParameterVector>(&agent, 1), d,
                                        ds, qa, B, 0, &forced);
    return (path_probability(b).array() * discounted(b.rew1, 0.9).array()).sum();
  };
  const auto b = rollout_vs_detective(env, TabularAgentModel{}, std::span<const nn::ParameterVector>(&agent, 1), det,
                                      ds, qa, B, 0, &forced);
  const ad::Matrix w =
      (path_probability(b).array() * discounted(b.rew1, 0.9).array() * B).matrix().replicate(1, 2);
  const auto g = detective_gradient(det, ds, b, w, std::nullopt, 0.0);
  const auto fd = brs::testing::finite_difference(value, det);
  EXPECT_LT(brs::testing::relative_error(g.grad, fd), 1e-3);
}

TEST(BrsGradient, SelfPlayUpdateMatchesExactEnumeration) {
  IpdEnv env({2, 0.9, {}});
  Rng rng(9);
  const ad::Matrix logits = random_matrix(5, 2, rng);
  const auto agent = tabular(logits);
  const ForcedActions forced = all_joint_paths(2);
  const int B = static_cast<int>(forced.size());
  const auto b = rollout_self_play(env, TabularAgentModel{}, agent, B, 0, &forced);
  const ad::Matrix w =
      (path_probability(b).array() * discounted(b.rew0, 0.9).array() * B).matrix().replicate(1, 2);
  const auto g = self_play_gradient(TabularAgentModel{}, agent, b, w);
  const exact::Logits want =
      exact::self_play_gradient(exact::RepeatedMatrixGame::prisoners_dilemma(2, 0.9), logits);
  EXPECT_LT((g["logits"] - want).norm(), 1e-10 * std::max(1.0, want.norm()));
  EXPECT_EQ(g["values"].norm(), 0.0);
}

// --- trainer ---------------------------------------------------------------

namespace {

struct SmallIpdSetup {
  IpdEnv env{{3, 0.96, {}}};
  DetectiveSpec ds{5, 6, 6, 2, 2, 6, nn::Activation::Relu};
  BrsConfig cfg;
  nn::ParameterVector agent, det;

  SmallIpdSetup() {
    cfg.batch_size = 4;
    cfg.buffer_capacity = 3;
    cfg.qa = {4, 2, 0.96, true, QaMode::Sample};
    cfg.agent_term1.lr = cfg.agent_term2.lr = cfg.agent_value.lr = cfg.self_play_opt.lr = cfg.detective.lr = 0.01;
    Rng rng(1);
    agent = tabular(random_matrix(5, 2, rng, 0.5));
    det = live_detective(ds, rng);
  }
  BrsTrainer<IpdEnv, TabularAgentModel> trainer(std::uint64_t seed = 4) const {
    return {env, TabularAgentModel{}, ds, cfg, seed, agent, det};
  }
};

}  // namespace

TEST(BrsTrainer, BufferGrowsToCapacity) {
  SmallIpdSetup s;
  auto tr = s.trainer();
  for (int k = 1; k <= 5; ++k) {
    const auto log = tr.iterate();
    EXPECT_EQ(log.buffer_size, static_cast<std::size_t>(std::min(k, 3)));
    EXPECT_TRUE(std::isfinite(log.self_play_return));
  }
  EXPECT_EQ(tr.iteration(), 5);
}

TEST(BrsTrainer, SameSeedReplaysBitForBit) {
  SmallIpdSetup s;
  auto a = s.trainer(), b = s.trainer();
  for (int k = 0; k < 3; ++k) {
    a.iterate();
    b.iterate();
  }
  EXPECT_EQ(a.agent(), b.agent());
  EXPECT_EQ(a.detective(), b.detective());
}

TEST(BrsTrainer, FrozenAgentRatesLeaveAgentUnchanged) {
  SmallIpdSetup s;
  s.cfg.agent_term1.lr = s.cfg.agent_term2.lr = s.cfg.agent_value.lr = s.cfg.self_play_opt.lr = 0.0;
  auto tr = s.trainer();
  tr.iterate();
  tr.iterate();
  EXPECT_EQ(tr.agent(), s.agent);
  EXPECT_FALSE(tr.detective() == s.det);
}

TEST(BrsTrainer, FrozenDetectiveRateLeavesDetectiveUnchanged) {
  SmallIpdSetup s;
  s.cfg.detective.lr = 0.0;
  auto tr = s.trainer();
  tr.iterate();
  tr.iterate();
  EXPECT_EQ(tr.detective(), s.det);
  EXPECT_FALSE(tr.agent() == s.agent);
}

TEST(BrsTrainer, NoSelfPlaySkipsTheSelfPlayStep) {
  SmallIpdSetup s;
  s.cfg = [&] {
    auto c = BrsConfig::no_self_play();
    c.batch_size = 4;
    c.qa = s.cfg.qa;
    return c;
  }();
  auto tr = s.trainer();
  const auto log = tr.iterate();
  EXPECT_TRUE(std::isnan(log.self_play_return));
  EXPECT_EQ(tr.buffer().capacity(), 2048u);
}

TEST(BrsTrainer, WithoutReplayBufferDetectiveTrainsFromTheFirstIteration) {
  SmallIpdSetup s;
  s.cfg.replay_buffer = false;
  auto tr = s.trainer();
  const auto log = tr.iterate();
  EXPECT_GT(log.grad_norm_detective, 0.0);
  SmallIpdSetup t;
  auto with_buffer = t.trainer();
  EXPECT_EQ(with_buffer.iterate().grad_norm_detective, 0.0);  // empty buffer on the first iteration
}

TEST(BrsTrainer, MismatchedDetectiveIsAConfigError) {
  SmallIpdSetup s;
  s.ds.qa_dim = 3;
  EXPECT_THROW(s.trainer(), ConfigError);
}

// --- self-play properties on enumerable games ------------------------------

TEST(SelfPlayProperties, SymmetricGameGivesEqualReturnsUnderSelfPlay) {
  Rng rng(21);
  for (const auto& g : {exact::RepeatedMatrixGame::prisoners_dilemma(3, 0.9),
                        exact::RepeatedMatrixGame::rock_paper_scissors(2, 0.8)}) {
    ASSERT_TRUE(g.symmetric());
    for (int trial = 0; trial < 20; ++trial) {
      const auto th = random_logits(g.state_count(), g.actions, rng);
      const auto v = exact::exact_values(g, th, th);
      EXPECT_NEAR(v[0], v[1], 1e-9);
    }
  }
}

TEST(SelfPlayProperties, MonteCarloReturnsAgreeWithinThreeStandardErrors) {
  const auto g = exact::RepeatedMatrixGame::prisoners_dilemma(4, 0.9);
  Rng rng(22);
  const auto th = random_logits(g.state_count(), g.actions, rng);
  const exact::Logits p = exact::softmax_rows(th);
  std::vector<double> r1, r2;
  for (int e = 0; e < 20000; ++e) {
    int s1 = 0, s2 = 0;
    double a1 = 0, a2 = 0, disc = 1;
    for (int t = 0; t < g.length; ++t) {
      const int a = uniform01(rng) < p(s1, 0) ? 0 : 1;
      const int b = uniform01(rng) < p(s2, 0) ? 0 : 1;
      a1 += disc * g.r(a, b)[0];
      a2 += disc * g.r(a, b)[1];
      disc *= g.discount;
      s1 = g.state_of(a, b);
      s2 = g.state_of(b, a);
    }
    r1.push_back(a1);
    r2.push_back(a2);
  }
  const double v = exact::exact_values(g, th, th)[0];
  EXPECT_LE(std::abs(mean_of(r1) - v), 3 * standard_error(r1));
  EXPECT_LE(std::abs(mean_of(r2) - v), 3 * standard_error(r2));
}

TEST(SelfPlayProperties, SelfPlayUpdateIsParallelToRewardSharing) {
  const auto g = exact::RepeatedMatrixGame::prisoners_dilemma(2, 1.0);
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const auto th = random_logits(g.state_count(), g.actions, rng);
    const auto sp = exact::self_play_gradient(g, th);
    const auto [g1, g2] = exact::reward_sharing_gradients(g, th, th);
    EXPECT_NEAR(exact::cosine_similarity(sp, g1 + g2), 1.0, 1e-9);
    EXPECT_LT((2.0 * sp - (g1 + g2)).norm(), 1e-9);
  }
}

TEST(SelfPlayProperties, RewardSharingGradientMatchesFiniteDifferences) {
  const auto g = exact::RepeatedMatrixGame::prisoners_dilemma(2, 0.9);
  Rng rng(24);
  const auto t1 = random_logits(5, 2, rng), t2 = random_logits(5, 2, rng);
  const auto [g1, g2] = exact::reward_sharing_gradients(g, t1, t2);
  auto shared = [&](const exact::Logits& a, const exact::Logits& b) {
    const auto v = exact::exact_values(g, a, b);
    return v[0] + v[1];
  };
  for (Eigen::Index i = 0; i < t1.size(); ++i) {
    auto up = t1, down = t1;
    up.data()[i] += 1e-6;
    down.data()[i] -= 1e-6;
    EXPECT_NEAR(g1.data()[i], (shared(up, t2) - shared(down, t2)) / 2e-6, 1e-7);
    up = t2;
    down = t2;
    up.data()[i] += 1e-6;
    down.data()[i] -= 1e-6;
    EXPECT_NEAR(g2.data()[i], (shared(t1, up) - shared(t1, down)) / 2e-6, 1e-7);
  }
}

TEST(SelfPlayProperties, ZeroSumGameGivesZeroSelfPlayGradient) {
  const auto g = exact::RepeatedMatrixGame::rock_paper_scissors(3, 0.9);
  ASSERT_TRUE(g.zero_sum());
  Rng rng(25);
  for (int trial = 0; trial < 10; ++trial) {
    EXPECT_LT(exact::self_play_gradient(g, random_logits(g.state_count(), g.actions, rng)).cwiseAbs().maxCoeff(),
              1e-9);
  }
}

TEST(SelfPlayProperties, AllDefectStartPushesMutualCooperationUp) {
  const auto g = exact::RepeatedMatrixGame::prisoners_dilemma(2, 1.0);
  exact::Logits th = exact::Logits::Zero(5, 2);
  th.col(1).setConstant(3.0);  // defect with probability 0.95 everywhere
  const auto sp = exact::self_play_gradient(g, th);
  EXPECT_GT(sp(ipd::kCC, 0), 0.0);
  EXPECT_LT(sp(ipd::kCC, 1), 0.0);
}

// --- IPD trainers ----------------------------------------------------------

TEST(IpdPolicyNet, GradientMatchesFiniteDifferences) {
  const IpdPolicyNet net{6};
  Rng rng(31);
  const auto p = net.init(rng);
  StateActionCoefficients c{};
  for (auto& row : c) row = {normal(rng), normal(rng)};
  auto value = [&](const nn::ParameterVector& q) {
    const auto t = net.table(q);
    double v = 0.0;
    for (int s = 0; s < 5; ++s) v += c[s][0] * std::log(t.p[s]) + c[s][1] * std::log(1.0 - t.p[s]);
    return v;
  };
  EXPECT_LT(brs::testing::relative_error(net.gradient(p, c), brs::testing::finite_difference(value, p)), 1e-6);
}

TEST(EmaBaseline, StartsAtTheFirstObservation) {
  EmaBaseline b(0.9);
  EXPECT_FALSE(b.initialized());
  b.update(-4.0);
  EXPECT_EQ(b.value(), -4.0);
  b.update(6.0);
  EXPECT_NEAR(b.value(), 0.9 * -4.0 + 0.1 * 6.0, 1e-12);
}

TEST(IpdTsdTrainer, ZeroRatesLeavePolicyUnchanged) {
  IpdTrainConfig cfg;
  cfg.lr = cfg.self_play_lr = 0.0;
  IpdTsdTrainer tr({6, 1.0, {}}, cfg, 3);
  const auto before = tr.params();
  for (int i = 0; i < 5; ++i) tr.iterate();
  EXPECT_EQ(tr.params(), before);
}

TEST(IpdTsdTrainer, LearnsTitForTatOnOneSeed) {
  IpdTsdTrainer tr({6, 1.0, {}}, IpdTrainConfig{}, 1);
  for (int i = 0; i < IpdTrainConfig{}.iterations; ++i) tr.iterate();
  EXPECT_TRUE(is_tit_for_tat(tr.table()));
}

TEST(IpdTsdTrainer, AsymmetricPayoffWithSelfPlayIsAConfigError) {
  ipd::IpdConfig env;
  env.payoff.reward[0][1] = {-3.0, 1.0};
  EXPECT_THROW(IpdTsdTrainer(env, IpdTrainConfig{}, 0), ConfigError);
  IpdTrainConfig nosp;
  nosp.self_play = false;
  EXPECT_NO_THROW(IpdTsdTrainer(env, nosp, 0));
}

TEST(NaiveDuel, ZeroRateLeavesBothUnchanged) {
  IpdTrainConfig cfg;
  cfg.lr = 0.0;
  NaiveDuelTrainer tr({6, 1.0, {}}, cfg, 2);
  const auto a = tr.params(0), b = tr.params(1);
  for (int i = 0; i < 5; ++i) tr.iterate();
  EXPECT_EQ(tr.params(0), a);
  EXPECT_EQ(tr.params(1), b);
}

TEST(NaiveDuel, IndependentLearnersDriftToDefection) {
  NaiveDuelTrainer tr({6, 1.0, {}}, IpdTrainConfig{}, 1);
  for (int i = 0; i < IpdTrainConfig{}.iterations; ++i) tr.iterate();
  for (int p = 0; p < 2; ++p) {
    for (double x : tr.table(p).p) EXPECT_LT(x, 0.1);
  }
}

// --- analytic IPD ----------------------------------------------------------

TEST(AnalyticBestResponse, DefectsAgainstAlwaysCooperate) {
  const auto br = exact_best_response(ipd::MemoryOnePolicy::always_cooperate(), AnalyticConfig{});
  EXPECT_TRUE(br.converged);
  EXPECT_LT(br.policy.p[ipd::kStart], 0.1);
  EXPECT_LT(br.policy.p[ipd::kDC], 0.1);
}

TEST(AnalyticBestResponse, CooperatesWithTitForTat) {
  const auto br = exact_best_response(ipd::MemoryOnePolicy::tit_for_tat(), AnalyticConfig{});
  EXPECT_GT(br.policy.p[ipd::kStart], 0.9);
  EXPECT_GT(br.policy.p[ipd::kCC], 0.9);
  EXPECT_NEAR(br.values.v1, -1.0 / (1.0 - 0.96), 1.0);
}

TEST(AnalyticTrainer, OuterGradientMatchesFiniteDifferencesThroughTheInnerLoop) {
  AnalyticConfig cfg;
  cfg.inner_max_iterations = 40;
  cfg.inner_tolerance = 1e-300;  // fixed inner length keeps the objective smooth
  AnalyticTrainer tr(cfg);
  // Objective at logits x: agent value against 40 ascent steps from zero.
  auto objective = [&](const Logits5& x) {
    const auto p = policy_from_logits(x);
    std::array<double, 5> phi{};
    for (int k = 0; k < cfg.inner_max_iterations; ++k) detail::inner_step<double>(p.p, phi, cfg.discount, cfg.inner_lr);
    return ipd::exact_memory_one_value(p, policy_from_logits(phi), cfg.discount).v1;
  };
  Eigen::VectorXd fd(5);
  for (int i = 0; i < 5; ++i) {
    Logits5 up{}, down{};
    up[i] = 1e-6;
    down[i] = -1e-6;
    fd(i) = (objective(up) - objective(down)) / 2e-6;
  }
  const auto log = tr.iterate();
  EXPECT_NEAR(log.grad_norm, fd.norm(), 1e-6 * std::max(1.0, fd.norm()));
  // Adam's first step moves every logit by lr in the gradient's direction.
  const auto x = tr.logits();
  for (int i = 0; i < 5; ++i) {
    if (std::abs(fd(i)) > 1e-8) {
      EXPECT_NEAR(x[i], cfg.lr * (fd(i) > 0 ? 1.0 : -1.0), 1e-6);
    }
  }
}

TEST(AnalyticConfig, RejectsDiscountOfOne) {
  AnalyticConfig c;
  c.discount = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}
