#pragma once

// Best-response shaping trainer for recurrent (or tabular) agents against a
// QA-conditioned detective. One iteration runs, in order: a detective update
// against perturbed agents drawn from the replay buffer, an agent update
// against the detective with two separately optimized terms, an optional
// self-play update, and a buffer push.
//
// The agent is always player 0 and the detective player 1. Gradients of the
// detective's log-probabilities with respect to the agent flow only through
// the QA estimates; they are computed one environment step at a time so that
// only one step's inner-rollout graph is alive at once. The dependence of the
// QA roots' recurrent state on the agent parameters is chained back through
// the main rollout graph afterwards.

#include <chrono>
#include <optional>
#include <vector>

#include <json.hpp>

#include "brs/common.hpp"
#include "brs/core/game.hpp"
#include "brs/core/returns.hpp"
#include "brs/detectives/agent_model.hpp"
#include "brs/detectives/detective_net.hpp"
#include "brs/detectives/qa.hpp"
#include "brs/nn/losses.hpp"
#include "brs/nn/optim.hpp"
#include "brs/training/replay_buffer.hpp"

namespace brs {

struct BrsConfig {
  int batch_size = 128;
  double sigma = 0.1;  // noise standard deviation for buffer samples
  std::size_t buffer_capacity = 512;
  bool replay_buffer = true;
  bool self_play = true;
  double gae_lambda = 1.0;
  double agent_entropy = 0.0;
  double detective_entropy = 0.0;
  nn::OptimizerConfig agent_term1{nn::Algorithm::Adam, 3e-4};
  nn::OptimizerConfig agent_term2{nn::Algorithm::Adam, 3e-4};
  nn::OptimizerConfig agent_value{nn::Algorithm::Adam, 3e-4};
  nn::OptimizerConfig self_play_opt{nn::Algorithm::Adam, 3e-4};
  nn::OptimizerConfig detective{nn::Algorithm::Adam, 3e-4};
  QaConfig qa{};

  /// Settings without self-play: larger buffer and a faster agent rate.
  static BrsConfig no_self_play() {
    BrsConfig c;
    c.self_play = false;
    c.buffer_capacity = 2048;
    c.agent_term1.lr = 1e-3;
    c.agent_term2.lr = 1e-3;
    return c;
  }

  void validate() const {
    if (batch_size < 1) throw ConfigError("brs.batch_size must be >= 1");
    if (!(sigma >= 0.0)) throw ConfigError("brs.sigma must be >= 0");
    if (buffer_capacity < 1) throw ConfigError("brs.buffer_capacity must be >= 1");
    if (gae_lambda < 0.0 || gae_lambda > 1.0) throw ConfigError("brs.gae_lambda must lie in [0, 1]");
    for (const auto* o : {&agent_term1, &agent_term2, &agent_value, &self_play_opt, &detective}) {
      if (!(o->lr >= 0.0)) throw ConfigError("brs learning rates must be >= 0");
    }
    qa.validate();
  }
};

/// One batch of episodes played by the agent (player 0) against an opponent
/// (player 1). Per-step containers are indexed [t], matrices are B x T.
template <class State>
struct EpisodeBatch {
  int B = 0;
  int T = 0;
  std::vector<std::vector<State>> states;  // state before step t
  std::vector<ad::Matrix> obs0, obs1;      // B x obs_dim
  std::vector<std::vector<int>> act0, act1;
  ad::Matrix rew0, rew1;
  ad::Matrix logp0, logp1;
  std::vector<ad::Matrix> agent_hidden;      // agent state before step t, B x H
  std::vector<ad::Matrix> detective_hidden;  // detective state after observing step t
  std::vector<ad::Matrix> qa_input;          // scaled QA vectors fed to the detective
  std::vector<std::uint64_t> qa_seed;

  std::vector<double> per_step_return(int player) const {
    const ad::Matrix& r = player == 0 ? rew0 : rew1;
    std::vector<double> out(static_cast<std::size_t>(B));
    for (int i = 0; i < B; ++i) out[static_cast<std::size_t>(i)] = T == 0 ? 0.0 : r.row(i).sum() / T;
    return out;
  }
};

/// Optional forced joint actions, [episode][t]. Used by exact-enumeration
/// checks that replay every joint path instead of sampling.
using ForcedActions = std::vector<std::vector<std::array<int, 2>>>;

/// Rows x T advantages from rewards and values (both B x T) with zero
/// bootstrap at the horizon.
inline ad::Matrix batch_advantages(const ad::Matrix& rewards, const ad::Matrix& values, double gamma, double lambda) {
  ad::Matrix adv(rewards.rows(), rewards.cols());
  for (Eigen::Index i = 0; i < rewards.rows(); ++i) {
    const Eigen::RowVectorXd r = rewards.row(i);
    const Eigen::RowVectorXd v = values.row(i);
    const auto a = gae_advantages(std::span<const double>(r.data(), static_cast<std::size_t>(r.size())),
                                  std::span<const double>(v.data(), static_cast<std::size_t>(v.size())), 0.0, gamma,
                                  lambda);
    for (Eigen::Index t = 0; t < rewards.cols(); ++t) adv(i, t) = a[static_cast<std::size_t>(t)];
  }
  return adv;
}

namespace detail {

inline int sample_row(const ad::Matrix& log_probs, Eigen::Index row, Rng& rng) {
  const Eigen::RowVectorXd p = log_probs.row(row).array().exp();
  return sample_index(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())), rng);
}

template <class Env>
ad::Matrix observe_rows(const Env& env, const std::vector<typename Env::State>& states, int player) {
  ad::Matrix m(static_cast<Eigen::Index>(states.size()), env.spec().observation_dim);
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto o = env.observe(states[i], player);
    m.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(o.data(), static_cast<Eigen::Index>(o.size()));
  }
  return m;
}

template <class State>
void init_batch(EpisodeBatch<State>& b, int B, int T) {
  b.B = B;
  b.T = T;
  b.rew0 = b.rew1 = b.logp0 = b.logp1 = ad::Matrix::Zero(B, T);
}

inline void check_forced(const ForcedActions* forced, int B, int T) {
  if (!forced) return;
  if (static_cast<int>(forced->size()) != B) throw ConfigError("forced actions need one sequence per episode");
  for (const auto& f : *forced) {
    if (static_cast<int>(f.size()) != T) throw ConfigError("forced action sequences must cover the horizon");
  }
}

}  // namespace detail

/// Plays B episodes of the agent against the detective. `agents` holds either
/// one parameter set shared by every episode or one per episode.
template <Environment Env, AgentModel Model>
EpisodeBatch<typename Env::State> rollout_vs_detective(const Env& env, const Model& model,
                                                       std::span<const nn::ParameterVector> agents,
                                                       const nn::ParameterVector& det, const DetectiveSpec& dspec,
                                                       const QaConfig& qa, int B, std::uint64_t seed,
                                                       const ForcedActions* forced = nullptr) {
  const GameSpec spec = env.spec();
  const int T = spec.episode_length;
  const bool shared = agents.size() == 1;
  if (!shared && static_cast<int>(agents.size()) != B) throw ConfigError("need one agent or one agent per episode");
  detail::check_forced(forced, B, T);
  EpisodeBatch<typename Env::State> b;
  detail::init_batch(b, B, T);
  std::vector<Rng> env_rng;
  std::vector<typename Env::State> states;
  for (int i = 0; i < B; ++i) {
    env_rng.push_back(make_rng(seed, "env", static_cast<std::uint64_t>(i)));
    states.push_back(env.reset(env_rng.back()));
  }
  Rng act_rng = make_rng(seed, "actions");
  const int H = model.hidden_dim();
  ad::Matrix h_agent = nn::initial_hidden(B, H);
  ad::Matrix h_det = nn::initial_hidden(B, dspec.hidden);
  const nn::PlainParams det_view(det);
  for (int t = 0; t < T; ++t) {
    const ad::Matrix o0 = detail::observe_rows(env, states, 0);
    const ad::Matrix o1 = detail::observe_rows(env, states, 1);
    const std::uint64_t qa_seed = derive_seed(seed, "qa", static_cast<std::uint64_t>(t));
    ad::Matrix qa_in(B, spec.action_count);
    nn::RecurrentOutput<ad::Matrix> out;
    if (shared) {
      Rng qrng(qa_seed);
      qa_in = qa_simulate(env, std::span<const typename Env::State>(states), model, agents[0], h_agent, qa, qrng)
                  .estimate;
      out = model.step(nn::PlainParams(agents[0]), o0, h_agent);
    } else {
      out.log_probs.resize(B, model.action_count());
      out.value.resize(B, 1);
      out.hidden.resize(B, H);
      for (int i = 0; i < B; ++i) {
        const auto& p = agents[static_cast<std::size_t>(i)];
        Rng qrng(derive_seed(qa_seed, "episode", static_cast<std::uint64_t>(i)));
        const ad::Matrix hi = h_agent.row(i);
        qa_in.row(i) = qa_estimate(env, states[static_cast<std::size_t>(i)], model, p, hi, qa, qrng);
        auto oi = model.step(nn::PlainParams(p), ad::Matrix(o0.row(i)), hi);
        out.log_probs.row(i) = oi.log_probs;
        out.value.row(i) = oi.value;
        out.hidden.row(i) = oi.hidden;
      }
    }
    qa_in *= qa.input_scale();
    h_det = detective_encode(det_view, dspec, o1, h_det);
    const ad::Matrix det_lp = detective_heads(det_view, dspec, h_det, qa_in).log_probs;
    std::vector<int> a0(static_cast<std::size_t>(B)), a1(static_cast<std::size_t>(B));
    std::vector<typename Env::State> before = states;
    for (int i = 0; i < B; ++i) {
      const auto k = static_cast<std::size_t>(i);
      if (forced) {
        a0[k] = (*forced)[k][static_cast<std::size_t>(t)][0];
        a1[k] = (*forced)[k][static_cast<std::size_t>(t)][1];
      } else {
        a0[k] = detail::sample_row(out.log_probs, i, act_rng);
        a1[k] = detail::sample_row(det_lp, i, act_rng);
      }
      b.logp0(i, t) = out.log_probs(i, a0[k]);
      b.logp1(i, t) = det_lp(i, a1[k]);
      const StepOutcome so = env.step(states[k], {a0[k], a1[k]}, env_rng[k]);
      b.rew0(i, t) = so.rewards[0];
      b.rew1(i, t) = so.rewards[1];
    }
    b.states.push_back(std::move(before));
    b.obs0.push_back(o0);
    b.obs1.push_back(o1);
    b.act0.push_back(std::move(a0));
    b.act1.push_back(std::move(a1));
    b.agent_hidden.push_back(h_agent);
    b.detective_hidden.push_back(h_det);
    b.qa_input.push_back(std::move(qa_in));
    b.qa_seed.push_back(qa_seed);
    h_agent = std::move(out.hidden);
  }
  return b;
}

/// B episodes of the agent against a parameter-tied copy of itself.
template <Environment Env, AgentModel Model>
EpisodeBatch<typename Env::State> rollout_self_play(const Env& env, const Model& model,
                                                    const nn::ParameterVector& agent, int B, std::uint64_t seed,
                                                    const ForcedActions* forced = nullptr) {
  const int T = env.spec().episode_length;
  detail::check_forced(forced, B, T);
  EpisodeBatch<typename Env::State> b;
  detail::init_batch(b, B, T);
  std::vector<Rng> env_rng;
  std::vector<typename Env::State> states;
  for (int i = 0; i < B; ++i) {
    env_rng.push_back(make_rng(seed, "env", static_cast<std::uint64_t>(i)));
    states.push_back(env.reset(env_rng.back()));
  }
  Rng act_rng = make_rng(seed, "actions");
  ad::Matrix h = nn::initial_hidden(2 * B, model.hidden_dim());
  const nn::PlainParams view(agent);
  for (int t = 0; t < T; ++t) {
    const ad::Matrix o0 = detail::observe_rows(env, states, 0);
    const ad::Matrix o1 = detail::observe_rows(env, states, 1);
    ad::Matrix obs(2 * B, o0.cols());
    obs << o0, o1;
    auto out = model.step(view, obs, h);
    std::vector<int> a0(static_cast<std::size_t>(B)), a1(static_cast<std::size_t>(B));
    std::vector<typename Env::State> before = states;
    for (int i = 0; i < B; ++i) {
      const auto k = static_cast<std::size_t>(i);
      if (forced) {
        a0[k] = (*forced)[k][static_cast<std::size_t>(t)][0];
        a1[k] = (*forced)[k][static_cast<std::size_t>(t)][1];
      } else {
        a0[k] = detail::sample_row(out.log_probs, i, act_rng);
        a1[k] = detail::sample_row(out.log_probs, B + i, act_rng);
      }
      b.logp0(i, t) = out.log_probs(i, a0[k]);
      b.logp1(i, t) = out.log_probs(B + i, a1[k]);
      const StepOutcome so = env.step(states[k], {a0[k], a1[k]}, env_rng[k]);
      b.rew0(i, t) = so.rewards[0];
      b.rew1(i, t) = so.rewards[1];
    }
    b.states.push_back(std::move(before));
    b.obs0.push_back(o0);
    b.obs1.push_back(o1);
    b.act0.push_back(std::move(a0));
    b.act1.push_back(std::move(a1));
    b.agent_hidden.push_back(h);
    h = std::move(out.hidden);
  }
  return b;
}

// ---------------------------------------------------------------------------
// Gradients. Every function takes the per-row, per-step weights explicitly so
// that exact-enumeration checks can supply path probabilities times returns.

struct DetectiveGradient {
  nn::ParameterVector grad;  // of pg + entropy - value loss
  double entropy = 0.0;
  double value_loss = 0.0;
};

/// Detective objective on a batch it played as player 1. `weights` multiply
/// the detective's log-probabilities (B x T); `targets` are its value targets.
/// The sum over steps is divided by B.
template <class State>
DetectiveGradient detective_gradient(const nn::ParameterVector& det, const DetectiveSpec& dspec,
                                     const EpisodeBatch<State>& b, const ad::Matrix& weights,
                                     const std::optional<ad::Matrix>& targets, double entropy_beta) {
  nn::BoundParams bp(det, true);
  ad::Var h = ad::constant(nn::initial_hidden(b.B, dspec.hidden));
  ad::Var objective = ad::scalar(0.0);
  ad::Var value_loss = ad::scalar(0.0);
  double ent = 0.0;
  for (int t = 0; t < b.T; ++t) {
    h = detective_encode(bp, dspec, ad::constant(b.obs1[static_cast<std::size_t>(t)]), h);
    auto heads = detective_heads(bp, dspec, h, ad::constant(b.qa_input[static_cast<std::size_t>(t)]));
    ad::Var lp = ad::pick(heads.log_probs, b.act1[static_cast<std::size_t>(t)]);
    objective = ad::add(objective, ad::scale(ad::sum(ad::mul(lp, ad::constant(weights.col(t)))), 1.0 / b.B));
    ad::Var e = nn::entropy_bonus(heads.log_probs, entropy_beta);
    objective = ad::add(objective, e);
    ent += ad::mean(nn::entropy(ad::constant(heads.log_probs.value()))).item();
    if (targets) {
      value_loss = ad::add(value_loss, nn::huber_value_loss(heads.value, ad::constant(targets->col(t))));
    }
  }
  value_loss = ad::scale(value_loss, 1.0 / std::max(1, b.T));
  DetectiveGradient g;
  g.grad = bp.gradient(ad::sub(objective, value_loss));
  g.entropy = ent / std::max(1, b.T);
  g.value_loss = value_loss.item();
  return g;
}

/// Plain forward of the detective's values along a batch (B x T).
template <class State>
ad::Matrix detective_values(const nn::ParameterVector& det, const DetectiveSpec& dspec, const EpisodeBatch<State>& b) {
  const nn::PlainParams view(det);
  ad::Matrix v(b.B, b.T);
  for (int t = 0; t < b.T; ++t) {
    v.col(t) = detective_heads(view, dspec, b.detective_hidden[static_cast<std::size_t>(t)],
                               b.qa_input[static_cast<std::size_t>(t)])
                   .value;
  }
  return v;
}

struct AgentGradients {
  nn::ParameterVector term1;  // own log-probs (plus entropy bonus)
  nn::ParameterVector term2;  // detective log-probs through QA
  nn::ParameterVector value;  // negative value loss
  ad::Matrix values;          // agent value predictions, B x T
  double entropy = 0.0;
};

/// Both terms of the agent objective against a fixed detective. `weights`
/// (B x T) multiply the log-probabilities of step t in both terms; sums over
/// steps are divided by B. `targets` are value targets (optional).
template <Environment Env, AgentModel Model>
AgentGradients agent_gradients(const Env& env, const Model& model, const nn::ParameterVector& agent,
                               const nn::ParameterVector& det, const DetectiveSpec& dspec, const QaConfig& qa,
                               const EpisodeBatch<typename Env::State>& b, const ad::Matrix& weights,
                               const std::optional<ad::Matrix>& targets, double entropy_beta,
                               bool with_term2 = true) {
  AgentGradients g;
  nn::BoundParams bp(agent, true);
  std::vector<ad::Var> hidden_before;
  ad::Var h = ad::constant(nn::initial_hidden(b.B, model.hidden_dim()));
  ad::Var term1 = ad::scalar(0.0);
  ad::Var value_loss = ad::scalar(0.0);
  g.values.resize(b.B, b.T);
  double ent = 0.0;
  for (int t = 0; t < b.T; ++t) {
    hidden_before.push_back(h);
    auto out = model.step(bp, ad::constant(b.obs0[static_cast<std::size_t>(t)]), h);
    ad::Var lp = ad::pick(out.log_probs, b.act0[static_cast<std::size_t>(t)]);
    term1 = ad::add(term1, ad::scale(ad::sum(ad::mul(lp, ad::constant(weights.col(t)))), 1.0 / b.B));
    term1 = ad::add(term1, nn::entropy_bonus(out.log_probs, entropy_beta));
    ent += ad::mean(nn::entropy(ad::constant(out.log_probs.value()))).item();
    g.values.col(t) = out.value.value();
    if (targets) value_loss = ad::add(value_loss, nn::huber_value_loss(out.value, ad::constant(targets->col(t))));
    h = out.hidden;
  }
  g.entropy = ent / std::max(1, b.T);
  g.term1 = bp.gradient(term1);
  g.value = targets ? bp.gradient(ad::scale(value_loss, -1.0 / std::max(1, b.T))) : agent.zeros_like();
  g.term2 = agent.zeros_like();
  if (!with_term2) return g;

  const nn::BoundParams det_const(det, false);
  ad::Var chain = ad::scalar(0.0);
  bool chained = false;
  for (int t = 0; t < b.T; ++t) {
    const auto k = static_cast<std::size_t>(t);
    Rng qrng(b.qa_seed[k]);
    const QaRecord rec =
        qa_simulate(env, std::span<const typename Env::State>(b.states[k]), model, agent, b.agent_hidden[k], qa, qrng);
    nn::BoundParams step_params(agent, true);
    ad::Var h0 = ad::parameter(b.agent_hidden[k]);
    ad::Var qa_var = ad::scale(qa_surrogate(model, step_params, rec, h0, qa), qa.input_scale());
    auto heads = detective_heads(det_const, dspec, ad::constant(b.detective_hidden[k]), qa_var);
    ad::Var lp = ad::pick(heads.log_probs, b.act1[k]);
    ad::Var loss = ad::scale(ad::sum(ad::mul(lp, ad::constant(weights.col(t)))), 1.0 / b.B);
    if (!loss.requires_grad()) continue;
    g.term2 += step_params.gradient(loss);
    const ad::Matrix& gh = h0.grad();
    if (t > 0 && gh.size() == b.agent_hidden[k].size() && hidden_before[k].requires_grad()) {
      chain = ad::add(chain, ad::sum(ad::mul(hidden_before[k], ad::constant(gh))));
      chained = true;
    }
  }
  if (chained) g.term2 += bp.gradient(chain);
  return g;
}

/// Self-play objective: player 0's weights multiply both players'
/// log-probabilities at the same step. Rows of the shared graph are
/// (player 0 episodes, player 1 episodes).
template <AgentModel Model, class State>
nn::ParameterVector self_play_gradient(const Model& model, const nn::ParameterVector& agent,
                                       const EpisodeBatch<State>& b, const ad::Matrix& weights) {
  nn::BoundParams bp(agent, true);
  ad::Var h = ad::constant(nn::initial_hidden(2 * b.B, model.hidden_dim()));
  ad::Var objective = ad::scalar(0.0);
  for (int t = 0; t < b.T; ++t) {
    const auto k = static_cast<std::size_t>(t);
    ad::Matrix obs(2 * b.B, b.obs0[k].cols());
    obs << b.obs0[k], b.obs1[k];
    std::vector<int> acts = b.act0[k];
    acts.insert(acts.end(), b.act1[k].begin(), b.act1[k].end());
    ad::Matrix w(2 * b.B, 1);
    w << weights.col(t), weights.col(t);
    auto out = model.step(bp, ad::constant(std::move(obs)), h);
    objective = ad::add(objective,
                        ad::scale(ad::sum(ad::mul(ad::pick(out.log_probs, acts), ad::constant(std::move(w)))), 1.0 / b.B));
    h = out.hidden;
  }
  return bp.gradient(objective);
}

/// Player-0 value predictions along a self-play batch (B x T).
template <AgentModel Model, class State>
ad::Matrix self_play_values(const Model& model, const nn::ParameterVector& agent, const EpisodeBatch<State>& b) {
  const nn::PlainParams view(agent);
  ad::Matrix v(b.B, b.T);
  for (int t = 0; t < b.T; ++t) {
    v.col(t) = model.step(view, b.obs0[static_cast<std::size_t>(t)], ad::Matrix(b.agent_hidden[static_cast<std::size_t>(t)].topRows(b.B)))
                   .value;
  }
  return v;
}

// ---------------------------------------------------------------------------

struct IterationLog {
  long iteration = 0;
  double agent_vs_detective = 0.0;  // agent per-step mean return
  double detective_vs_agent = 0.0;  // detective per-step return in the agent step
  double detective_training_return = 0.0;
  double self_play_return = std::numeric_limits<double>::quiet_NaN();
  std::size_t buffer_size = 0;
  double agent_entropy = 0.0;
  double detective_entropy = 0.0;
  double detective_value_loss = 0.0;
  double grad_norm_term1 = 0.0;
  double grad_norm_term2 = 0.0;
  double grad_norm_self_play = 0.0;
  double grad_norm_detective = 0.0;
  double seconds = 0.0;

  nlohmann::json to_json() const {
    auto num = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
    return {{"iteration", iteration},
            {"agent_vs_detective", num(agent_vs_detective)},
            {"detective_vs_agent", num(detective_vs_agent)},
            {"detective_training_return", num(detective_training_return)},
            {"self_play_return", num(self_play_return)},
            {"buffer_size", buffer_size},
            {"agent_entropy", num(agent_entropy)},
            {"detective_entropy", num(detective_entropy)},
            {"detective_value_loss", num(detective_value_loss)},
            {"grad_norm_term1", num(grad_norm_term1)},
            {"grad_norm_term2", num(grad_norm_term2)},
            {"grad_norm_self_play", num(grad_norm_self_play)},
            {"grad_norm_detective", num(grad_norm_detective)},
            {"seconds", num(seconds)}};
  }
};

template <Environment Env, AgentModel Model>
class BrsTrainer {
 public:
  BrsTrainer(Env env, Model model, DetectiveSpec dspec, BrsConfig cfg, std::uint64_t seed, nn::ParameterVector agent,
             nn::ParameterVector detective)
      : env_(std::move(env)),
        model_(std::move(model)),
        dspec_(dspec),
        cfg_(cfg),
        seed_(seed),
        agent_(std::move(agent)),
        detective_(std::move(detective)),
        buffer_(cfg.buffer_capacity),
        opt_term1_(cfg.agent_term1),
        opt_term2_(cfg.agent_term2),
        opt_value_(cfg.agent_value),
        opt_self_(cfg.self_play_opt),
        opt_det_(cfg.detective) {
    cfg_.validate();
    dspec_.validate();
    const GameSpec spec = env_.spec();
    if (dspec_.obs_dim != spec.observation_dim || dspec_.action_count != spec.action_count ||
        dspec_.qa_dim != spec.action_count) {
      throw ConfigError("detective dimensions do not match the environment");
    }
    if (model_.observation_dim() != spec.observation_dim || model_.action_count() != spec.action_count) {
      throw ConfigError("agent dimensions do not match the environment");
    }
  }

  const nn::ParameterVector& agent() const { return agent_; }
  const nn::ParameterVector& detective() const { return detective_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const BrsConfig& config() const { return cfg_; }
  long iteration() const { return iteration_; }

  /// Detective update against a batch of (perturbed) buffer agents, or the
  /// current agent without noise when the buffer is disabled.
  void train_detective_step(IterationLog& log) {
    Rng rng = make_rng(seed_, "detective-sample", static_cast<std::uint64_t>(iteration_));
    std::vector<nn::ParameterVector> agents;
    if (!cfg_.replay_buffer) {
      agents.assign(static_cast<std::size_t>(cfg_.batch_size), agent_);
    } else if (buffer_.empty()) {
      return;  // nothing to train against yet
    } else {
      agents = buffer_.sample(static_cast<std::size_t>(cfg_.batch_size), cfg_.sigma, rng);
    }
    const auto b = rollout_vs_detective(env_, model_, std::span<const nn::ParameterVector>(agents), detective_, dspec_,
                                        cfg_.qa, cfg_.batch_size,
                                        derive_seed(seed_, "detective-rollout", static_cast<std::uint64_t>(iteration_)));
    const ad::Matrix values = detective_values(detective_, dspec_, b);
    const double gamma = env_.spec().discount;
    const ad::Matrix adv = batch_advantages(b.rew1, values, gamma, cfg_.gae_lambda);
    const ad::Matrix targets = adv + values;
    auto g = detective_gradient(detective_, dspec_, b, adv, targets, cfg_.detective_entropy);
    opt_det_.step(detective_, g.grad);
    const auto r = b.per_step_return(1);
    log.detective_training_return = mean_of(r);
    log.detective_entropy = g.entropy;
    log.detective_value_loss = g.value_loss;
    log.grad_norm_detective = g.grad.norm();
  }

  void train_agent_step(IterationLog& log) {
    const auto b = rollout_vs_detective(env_, model_, std::span<const nn::ParameterVector>(&agent_, 1), detective_,
                                        dspec_, cfg_.qa, cfg_.batch_size,
                                        derive_seed(seed_, "agent-rollout", static_cast<std::uint64_t>(iteration_)));
    // Values from the plain forward; identical to the graph's values.
    ad::Matrix values(b.B, b.T);
    {
      const nn::PlainParams view(agent_);
      for (int t = 0; t < b.T; ++t) {
        values.col(t) =
            model_.step(view, b.obs0[static_cast<std::size_t>(t)], b.agent_hidden[static_cast<std::size_t>(t)]).value;
      }
    }
    const ad::Matrix adv = batch_advantages(b.rew0, values, env_.spec().discount, cfg_.gae_lambda);
    const ad::Matrix targets = adv + values;
    const bool term2 = cfg_.agent_term2.lr > 0.0;
    auto g = agent_gradients(env_, model_, agent_, detective_, dspec_, cfg_.qa, b, adv, targets, cfg_.agent_entropy,
                             term2);
    opt_term1_.step(agent_, g.term1);
    if (term2) opt_term2_.step(agent_, g.term2);
    opt_value_.step(agent_, g.value);
    log.agent_vs_detective = mean_of(b.per_step_return(0));
    log.detective_vs_agent = mean_of(b.per_step_return(1));
    log.agent_entropy = g.entropy;
    log.grad_norm_term1 = g.term1.norm();
    log.grad_norm_term2 = g.term2.norm();
  }

  void train_self_play_step(IterationLog& log) {
    const auto b = rollout_self_play(env_, model_, agent_, cfg_.batch_size,
                                     derive_seed(seed_, "self-play-rollout", static_cast<std::uint64_t>(iteration_)));
    const ad::Matrix values = self_play_values(model_, agent_, b);
    const ad::Matrix adv = batch_advantages(b.rew0, values, env_.spec().discount, cfg_.gae_lambda);
    const auto g = self_play_gradient(model_, agent_, b, adv);
    opt_self_.step(agent_, g);
    log.self_play_return = mean_of(b.per_step_return(0));
    log.grad_norm_self_play = g.norm();
  }

  IterationLog iterate() {
    const auto start = std::chrono::steady_clock::now();
    IterationLog log;
    log.iteration = iteration_;
    train_detective_step(log);
    train_agent_step(log);
    if (cfg_.self_play) train_self_play_step(log);
    buffer_.push(agent_);
    log.buffer_size = buffer_.size();
    if (!agent_.all_finite() || !detective_.all_finite()) throw NumericError("parameters became non-finite");
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ++iteration_;
    return log;
  }

  /// Restores trainer state from checkpoints (optimizer moments restart).
  void restore(nn::ParameterVector agent, nn::ParameterVector detective, long iteration) {
    agent.require_layout(agent_);
    detective.require_layout(detective_);
    agent_ = std::move(agent);
    detective_ = std::move(detective);
    iteration_ = iteration;
  }

 private:
  Env env_;
  Model model_;
  DetectiveSpec dspec_;
  BrsConfig cfg_;
  std::uint64_t seed_;
  nn::ParameterVector agent_;
  nn::ParameterVector detective_;
  ReplayBuffer buffer_;
  nn::Optimizer opt_term1_, opt_term2_, opt_value_, opt_self_, opt_det_;
  long iteration_ = 0;
};

}  // namespace brs
