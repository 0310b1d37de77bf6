#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "brs/detectives/agent_model.hpp"
#include "brs/detectives/detective_net.hpp"
#include "brs/detectives/qa.hpp"
#include "brs/detectives/tsd.hpp"
#include "brs/ipd/ipd.hpp"
#include "oracles.hpp"

using namespace brs;
using ipd::IpdEnv;

namespace {

using brs::testing::tabular;

ad::Matrix random_logits(Rng& rng, double scale = 1.0) {
  ad::Matrix l(5, 2);
  for (Eigen::Index i = 0; i < l.size(); ++i) l.data()[i] = scale * normal(rng);
  return l;
}

ad::Matrix qa_from(const IpdEnv& env, const nn::ParameterVector& p, const QaConfig& cfg, std::uint64_t seed,
                   IpdEnv::State root = {}) {
  Rng rng(seed);
  return qa_estimate(env, root, TabularAgentModel{}, p, nn::initial_hidden(1, 1), cfg, rng);
}

using brs::testing::BruteForceTree;

}  // namespace

// --- tree search ---------------------------------------------------------

TEST(Tsd, DepthTwoAgainstAlwaysCooperate) {
  Rng rng(0);
  const auto r = tsd_best_response(ipd::MemoryOnePolicy::always_cooperate().p, 2, rng);
  EXPECT_EQ(r.detective_actions, (std::vector<int>{1, 1}));
  EXPECT_EQ(r.detective_return, 0.0);
  EXPECT_EQ(r.agent_return, -6.0);
}

TEST(Tsd, DepthTwoAgainstTitForTat) {
  Rng rng(0);
  const auto r = tsd_best_response(ipd::MemoryOnePolicy::tit_for_tat().p, 2, rng);
  EXPECT_EQ(r.detective_actions, (std::vector<int>{0, 1}));
  EXPECT_EQ(r.detective_return, -1.0);
  EXPECT_EQ(r.agent_return, -4.0);
}

TEST(Tsd, SixStepsAgainstTitForTatDefectsOnlyAtTheEnd) {
  Rng rng(0);
  const auto r = tsd_best_response(ipd::MemoryOnePolicy::tit_for_tat().p, 6, rng);
  EXPECT_EQ(r.detective_actions, (std::vector<int>{0, 0, 0, 0, 0, 1}));
  EXPECT_EQ(r.detective_return, -5.0);
  EXPECT_EQ(r.agent_return, -8.0);
}

TEST(Tsd, TiesPickTheCooperateFirstPathAndAreFlagged) {
  ipd::PayoffMatrix flat;
  for (auto& row : flat.reward) {
    for (auto& cell : row) cell = {0.0, 0.0};
  }
  Rng rng(1);
  const auto r = tsd_best_response({0.5, 0.5, 0.5, 0.5, 0.5}, 3, rng, flat);
  EXPECT_TRUE(r.tie);
  EXPECT_EQ(r.detective_actions, (std::vector<int>{0, 0, 0}));
}

TEST(Tsd, MatchesBruteForceOnRandomPolicies) {
  Rng policies(7);
  for (int trial = 0; trial < 1000; ++trial) {
    std::array<double, 5> p;
    for (auto& x : p) x = uniform01(policies);
    const int depth = 1 + trial % 3;
    const std::uint64_t seed = derive_seed(99, "tsd", trial);
    Rng a(seed), b(seed);
    const auto r = tsd_best_response(p, depth, a);
    BruteForceTree oracle;
    std::vector<int> prefix;
    oracle.sample(p, prefix, ipd::kStart, depth, b);
    ASSERT_EQ(r.detective_return, oracle.best(depth));
    EXPECT_EQ(r.agent_nodes, (1 << depth) - 1);
    EXPECT_EQ(static_cast<std::size_t>(r.agent_nodes), oracle.agent.size());
    double lp = 0.0;
    int counted = 0;
    for (const auto& [pre, act] : oracle.agent) {
      // Rebuild each node's observation from its prefix.
      int state = ipd::kStart;
      std::vector<int> walk;
      for (int x : pre) {
        state = ipd::observation_index(oracle.agent.at(walk), x);
        walk.push_back(x);
      }
      const double pc = p[static_cast<std::size_t>(state)];
      lp += std::log(act == 0 ? pc : 1.0 - pc);
      ++counted;
    }
    EXPECT_NEAR(r.log_prob_sum, lp, 1e-9);
    int total = 0;
    for (const auto& c : r.counts) total += c[0] + c[1];
    EXPECT_EQ(total, counted);
  }
}

TEST(Tsd, DepthOutOfRangeIsAConfigError) {
  Rng rng(0);
  EXPECT_THROW(tsd_best_response(ipd::MemoryOnePolicy::tit_for_tat().p, 13, rng), ConfigError);
  EXPECT_THROW(tsd_best_response(ipd::MemoryOnePolicy::tit_for_tat().p, 0, rng), ConfigError);
}

// --- question answering --------------------------------------------------

TEST(Qa, OneStepAgainstAlwaysCooperate) {
  IpdEnv env({1, 1.0, {}});
  ad::Matrix l = ad::Matrix::Zero(5, 2);
  l.col(0).setConstant(60.0);
  for (QaMode mode : {QaMode::Sample, QaMode::Enumerate}) {
    QaConfig cfg{16, 1, 1.0, false, mode};
    const ad::Matrix d = qa_from(env, tabular(l), cfg, 3);
    EXPECT_NEAR(d(0, 0), -1.0, 1e-12);
    EXPECT_NEAR(d(0, 1), 0.0, 1e-12);
  }
}

TEST(Qa, SampleMeansMatchEnumerationWithinThreeStandardErrors) {
  Rng rng(5);
  for (int trial = 0; trial < 6; ++trial) {
    const int L = 2 + trial % 2;
    IpdEnv env({6, 0.9, {}});
    ad::Matrix logits = trial == 0 ? ad::Matrix(5, 2) : random_logits(rng);
    if (trial == 0) logits << 30, 0, 30, 0, 0, 30, 30, 0, 0, 30;  // tit for tat
    const auto p = tabular(logits);
    const ad::Matrix exact = qa_from(env, p, {1, L, 0.9, false, QaMode::Enumerate}, 0);
    Rng qrng(derive_seed(11, "qa", trial));
    const IpdEnv::State root{};
    const QaRecord rec = qa_simulate(env, std::span<const IpdEnv::State>(&root, 1), TabularAgentModel{}, p,
                                     nn::initial_hidden(1, 1), {10000, L, 0.9, false, QaMode::Sample}, qrng);
    for (int a = 0; a < 2; ++a) {
      std::vector<double> returns;
      for (Eigen::Index i = 0; i < rec.rows(); ++i) {
        if ((i / rec.paths) % 2 != a) continue;
        double g = 0.0, disc = 1.0;
        for (int k = 0; k < L; ++k, disc *= 0.9) g += disc * rec.rewards(i, k);
        returns.push_back(g);
      }
      const double se = standard_error(returns);
      EXPECT_NEAR(rec.estimate(0, a), mean_of(returns), 1e-9);
      EXPECT_LE(std::abs(rec.estimate(0, a) - exact(0, a)), 3.0 * se + 1e-12) << "trial " << trial << " action " << a;
    }
  }
}

TEST(Qa, LogitShiftLeavesEstimatesUnchanged) {
  IpdEnv env({6, 0.96, {}});
  Rng rng(2);
  ad::Matrix l = random_logits(rng);
  l = (l * 8.0).array().round() / 8.0;  // shifts by 4 stay exact
  ad::Matrix shifted = l.array() + 4.0;
  const QaConfig cfg{16, 4, 0.96, true, QaMode::Sample};
  const auto a = qa_from(env, tabular(l), cfg, 77);
  const auto b = qa_from(env, tabular(shifted), cfg, 77);
  EXPECT_EQ(a, b);
}

TEST(Qa, OpponentRewardIndependentOfAgentGivesZeroGradient) {
  ipd::PayoffMatrix pay;
  for (int a = 0; a < 2; ++a) {
    pay.reward[a][0][1] = -1.0;
    pay.reward[a][1][1] = 0.5;
  }
  IpdEnv env({6, 0.9, pay});
  Rng rng(4);
  const auto p = tabular(random_logits(rng));
  const IpdEnv::State root{};
  Rng q(1);
  const QaConfig cfg{1, 3, 0.9, false, QaMode::Enumerate};
  const auto rec = qa_simulate(env, std::span<const IpdEnv::State>(&root, 1), TabularAgentModel{}, p,
                               nn::initial_hidden(1, 1), cfg, q);
  nn::BoundParams bp(p, true);
  const auto g = bp.gradient(ad::sum(
      qa_surrogate(TabularAgentModel{}, bp, rec, ad::constant(nn::initial_hidden(1, 1)), cfg)));
  EXPECT_LT(g.norm(), 1e-12);
}

TEST(Qa, EnumeratedSurrogateMatchesFiniteDifferencesForRecurrentAgent) {
  IpdEnv env({6, 0.9, {}});
  const GruAgentModel model{{5, 6, 4, 2, nn::Activation::Tanh}};
  Rng rng(8);
  const auto params = model.init(rng);
  std::vector<IpdEnv::State> roots(2);
  roots[1].last = {0, 1};
  roots[1].t = 1;
  ad::Matrix h0(2, 4);
  for (Eigen::Index i = 0; i < h0.size(); ++i) h0.data()[i] = 0.3 * normal(rng);
  const QaConfig cfg{1, 2, 0.9, false, QaMode::Enumerate};
  const ad::Matrix w = (ad::Matrix(2, 2) << 0.7, -1.3, 0.4, 2.1).finished();
  auto value = [&](const nn::ParameterVector& p) {
    Rng q(0);
    const auto rec = qa_simulate(env, std::span<const IpdEnv::State>(roots), model, p, h0, cfg, q);
    return (rec.estimate.array() * w.array()).sum();
  };
  Rng q(0);
  const auto rec = qa_simulate(env, std::span<const IpdEnv::State>(roots), model, params, h0, cfg, q);
  nn::BoundParams bp(params, true);
  const auto sur = qa_surrogate(model, bp, rec, ad::constant(h0), cfg);
  EXPECT_NEAR((sur.value() - rec.estimate).norm(), 0.0, 1e-12);
  const auto g = bp.gradient(ad::sum(ad::mul(sur, ad::constant(w))));
  const auto fd = brs::testing::finite_difference(value, params);
  EXPECT_LT(brs::testing::relative_error(g, fd), 1e-6);
}

TEST(Qa, SampledSurrogateForwardEqualsEstimate) {
  IpdEnv env({6, 0.96, {}});
  Rng rng(3);
  const auto p = tabular(random_logits(rng));
  const IpdEnv::State root{};
  const QaConfig cfg{16, 4, 0.96, true, QaMode::Sample};
  Rng q(6);
  const auto rec = qa_simulate(env, std::span<const IpdEnv::State>(&root, 1), TabularAgentModel{}, p,
                               nn::initial_hidden(1, 1), cfg, q);
  nn::BoundParams bp(p, true);
  const auto sur = qa_surrogate(TabularAgentModel{}, bp, rec, ad::constant(nn::initial_hidden(1, 1)), cfg);
  EXPECT_NEAR((sur.value() - rec.estimate).norm(), 0.0, 1e-12);
}

TEST(Qa, EnumerationTooLargeIsAConfigError) {
  IpdEnv env({20, 0.96, {}});
  const auto p = tabular(ad::Matrix::Zero(5, 2));
  EXPECT_THROW(qa_from(env, p, {1, 12, 0.96, false, QaMode::Enumerate}, 0), ConfigError);
  EXPECT_THROW(QaConfig({0, 4}).validate(), ConfigError);
}

// --- detective network ---------------------------------------------------

TEST(Detective, ZeroActorHeadIsUniform) {
  const DetectiveSpec s{36, 8, 8, 4, 4, 8};
  Rng rng(1);
  auto p = init_detective(s, rng);
  p["pi.w"].setZero();
  p["pi.b"].setZero();
  ad::Matrix h = ad::Matrix::Random(3, 8), qa = ad::Matrix::Random(3, 4);
  const ad::Matrix probs = detective_act(p, s, h, qa);
  EXPECT_NEAR((probs.array() - 0.25).abs().maxCoeff(), 0.0, 1e-15);
}

TEST(Detective, QaWidthMismatchIsAConfigError) {
  const DetectiveSpec s{36, 8, 8, 4, 4, 8};
  Rng rng(1);
  const auto p = init_detective(s, rng);
  EXPECT_THROW(detective_act(p, s, ad::Matrix::Zero(1, 8), ad::Matrix::Zero(1, 3)), ConfigError);
}

TEST(Detective, LogProbGradientThroughQaMatchesFiniteDifferences) {
  IpdEnv env({1, 1.0, {}});
  const DetectiveSpec s{5, 6, 6, 2, 2, 6, nn::Activation::Tanh};
  Rng rng(12);
  auto det = init_detective(s, rng);
  det["pi.w"] = ad::Matrix::Random(6, 2);  // the actor head starts at zero
  det["trunk.l0.b"].setConstant(2.0);       // keep the relu units active
  det["trunk.l1.b"].setConstant(2.0);
  const auto agent = tabular(random_logits(rng));
  const QaConfig cfg{1, 1, 1.0, false, QaMode::Enumerate};
  const IpdEnv::State root{};
  const ad::Matrix obs = Eigen::Map<const ad::Matrix>(env.observe(root, 1).data(), 1, 5);
  const ad::Matrix h = detective_encode(nn::PlainParams(det), s, obs, nn::initial_hidden(1, s.hidden));
  auto log_prob = [&](const nn::ParameterVector& p) {
    Rng q(0);
    const ad::Matrix qa = qa_estimate(env, root, TabularAgentModel{}, p, nn::initial_hidden(1, 1), cfg, q);
    return std::log(detective_act(det, s, h, qa)(0, 1));
  };
  Rng q(0);
  const auto rec = qa_simulate(env, std::span<const IpdEnv::State>(&root, 1), TabularAgentModel{}, agent,
                               nn::initial_hidden(1, 1), cfg, q);
  nn::BoundParams bp(agent, true);
  const auto qa = qa_surrogate(TabularAgentModel{}, bp, rec, ad::constant(nn::initial_hidden(1, 1)), cfg);
  const auto heads = detective_heads(nn::BoundParams(det, false), s, ad::constant(h), qa);
  const auto g = bp.gradient(ad::pick(heads.log_probs, std::vector<int>{1}));
  const auto fd = brs::testing::finite_difference(log_prob, agent);
  EXPECT_GT(g.norm(), 1e-6) << "fd norm " << fd.norm();
  EXPECT_LT(brs::testing::relative_error(g, fd), 1e-3);
}
