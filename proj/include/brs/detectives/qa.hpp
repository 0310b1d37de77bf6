#pragma once

// Simulation-based behavioural probe of an agent.
//
// For a root state s and each opponent action A, delta_A is the discounted
// return of a random opponent that plays A first and uniformly afterwards,
// against the agent continuing from s for `inner_length` steps. The agent is
// player 0, the probing opponent player 1.
//
// Simulation runs without a graph and records every inner path. The
// differentiable estimate replays the record: each path return is weighted
// step by step by a factor of the agent's cumulative log-probability, the
// magic box when paths were sampled (forward value 1) or the prefix
// probability when paths were enumerated, so in both modes the gradient with
// respect to the agent's parameters is that of the estimate's expectation.

#include <span>
#include <vector>

#include "brs/common.hpp"
#include "brs/core/estimators.hpp"
#include "brs/core/game.hpp"
#include "brs/detectives/agent_model.hpp"

namespace brs {

enum class QaMode { Sample, Enumerate };

struct QaConfig {
  int num_samples = 16;
  int inner_length = 4;
  double discount = 0.96;
  /// Divide estimates by inner_length before they reach a detective.
  bool normalize = true;
  QaMode mode = QaMode::Sample;

  void validate() const {
    if (num_samples < 1) throw ConfigError("qa.num_samples must be >= 1");
    if (inner_length < 1) throw ConfigError("qa.inner_length must be >= 1");
    if (discount < 0.0 || discount > 1.0) throw ConfigError("qa.discount must lie in [0, 1]");
  }
  double input_scale() const { return normalize ? 1.0 / inner_length : 1.0; }
};

/// All inner paths of one probe. Rows are ordered (root, forced action, path).
struct QaRecord {
  int roots = 0;
  int actions = 0;
  int paths = 0;  // per (root, forced action)
  QaMode mode = QaMode::Sample;
  std::vector<ad::Matrix> observations;         // per inner step, rows x obs_dim
  std::vector<std::vector<int>> agent_actions;  // per inner step
  ad::Matrix rewards;                           // rows x inner_length, opponent rewards
  ad::Matrix path_weight;                       // rows x 1
  std::vector<Eigen::Index> root_of_row;
  ad::Matrix estimate;  // roots x actions, plain forward value

  Eigen::Index rows() const { return static_cast<Eigen::Index>(root_of_row.size()); }
};

namespace detail {

inline long checked_pow(long base, int exp, long limit) {
  long r = 1;
  for (int i = 0; i < exp; ++i) {
    r *= base;
    if (r > limit) throw ConfigError("QA enumeration too large; use sampling mode");
  }
  return r;
}

/// Index of the first row of every root.
inline std::vector<Eigen::Index> first_rows(const QaRecord& rec) {
  std::vector<Eigen::Index> out(static_cast<std::size_t>(rec.roots));
  for (int r = 0; r < rec.roots; ++r) out[static_cast<std::size_t>(r)] = static_cast<Eigen::Index>(r) * rec.actions * rec.paths;
  return out;
}

}  // namespace detail

/// Runs the probe from each root state. `h0` holds the agent's recurrent
/// state at each root (roots x hidden_dim).
template <Environment Env, AgentModel Model>
QaRecord qa_simulate(const Env& env, std::span<const typename Env::State> roots, const Model& model,
                     const nn::ParameterVector& params, const ad::Matrix& h0, const QaConfig& cfg, Rng& rng) {
  cfg.validate();
  const GameSpec spec = env.spec();
  const int na = spec.action_count;
  const int L = cfg.inner_length;
  if (h0.rows() != static_cast<Eigen::Index>(roots.size()) || h0.cols() != model.hidden_dim()) {
    throw ConfigError("qa_simulate: hidden state must be roots x hidden_dim");
  }
  QaRecord rec;
  rec.roots = static_cast<int>(roots.size());
  rec.actions = na;
  rec.mode = cfg.mode;
  const int agent_actions = model.action_count();
  long opp_paths = 1;
  long agent_paths = 1;
  if (cfg.mode == QaMode::Sample) {
    rec.paths = cfg.num_samples;
  } else {
    agent_paths = detail::checked_pow(agent_actions, L, 1 << 16);
    opp_paths = detail::checked_pow(na, L - 1, 1 << 16);
    rec.paths = static_cast<int>(detail::checked_pow(agent_paths * opp_paths, 1, 1 << 16));
  }
  const Eigen::Index n = static_cast<Eigen::Index>(rec.roots) * na * rec.paths;
  std::vector<typename Env::State> states;
  states.reserve(static_cast<std::size_t>(n));
  rec.root_of_row.reserve(static_cast<std::size_t>(n));
  for (int r = 0; r < rec.roots; ++r) {
    for (int a = 0; a < na; ++a) {
      for (int s = 0; s < rec.paths; ++s) {
        states.push_back(roots[static_cast<std::size_t>(r)]);
        rec.root_of_row.push_back(r);
      }
    }
  }
  const double uniform_weight = cfg.mode == QaMode::Sample ? 1.0 / rec.paths : std::pow(1.0 / na, L - 1);
  rec.path_weight = ad::Matrix::Constant(n, 1, uniform_weight);
  rec.rewards = ad::Matrix::Zero(n, L);
  ad::Matrix h;
  ad::Matrix cum_logp = ad::Matrix::Zero(n, 1);
  ad::Matrix est_rows = ad::Matrix::Zero(n, 1);
  const nn::PlainParams view(params);
  double disc = 1.0;
  for (int k = 0; k < L; ++k) {
    ad::Matrix obs(n, spec.observation_dim);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto o = env.observe(states[static_cast<std::size_t>(i)], 0);
      obs.row(i) = Eigen::Map<const Eigen::RowVectorXd>(o.data(), static_cast<Eigen::Index>(o.size()));
    }
    nn::RecurrentOutput<ad::Matrix> out;
    if (k == 0) {
      // Every row of a root starts from the same state and memory.
      const auto first = detail::first_rows(rec);
      auto o = model.step(view, ad::gather_rows(obs, first), h0);
      out = {ad::gather_rows(o.log_probs, rec.root_of_row), ad::gather_rows(o.value, rec.root_of_row),
             ad::gather_rows(o.hidden, rec.root_of_row)};
    } else {
      out = model.step(view, obs, h);
    }
    // Enumerated rows sharing an agent prefix up to k differ only in later
    // agent actions; each such prefix is repeated `suffixes` times.
    const double suffixes = cfg.mode == QaMode::Sample ? 1.0 : std::pow(agent_actions, L - 1 - k);
    std::vector<int> acts(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto row = static_cast<std::size_t>(i);
      const int path = static_cast<int>(i % rec.paths);
      const int forced = static_cast<int>((i / rec.paths) % na);
      int agent_a = 0;
      int opp_a = forced;
      if (cfg.mode == QaMode::Sample) {
        ad::Matrix pr = out.log_probs.row(i).array().exp();
        agent_a = sample_index(std::span<const double>(pr.data(), static_cast<std::size_t>(pr.size())), rng);
        if (k > 0) opp_a = uniform_int(rng, na);
      } else {
        // path index = agent digits (base agent_actions) then opponent digits (base na)
        long code = path;
        const long agent_code = code % agent_paths;
        const long opp_code = code / agent_paths;
        agent_a = static_cast<int>((agent_code / detail::checked_pow(agent_actions, k, 1L << 40)) % agent_actions);
        if (k > 0) opp_a = static_cast<int>((opp_code / detail::checked_pow(na, k - 1, 1L << 40)) % na);
      }
      acts[row] = agent_a;
      cum_logp(i, 0) += out.log_probs(i, agent_a);
      const StepOutcome so = env.step(states[row], {agent_a, opp_a}, rng);
      rec.rewards(i, k) = so.rewards[1];
      const double factor = cfg.mode == QaMode::Sample ? 1.0 : std::exp(cum_logp(i, 0)) / suffixes;
      est_rows(i, 0) += disc * so.rewards[1] * factor;
    }
    rec.observations.push_back(std::move(obs));
    rec.agent_actions.push_back(std::move(acts));
    h = std::move(out.hidden);
    disc *= cfg.discount;
  }
  rec.estimate = ad::Matrix::Zero(rec.roots, na);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int forced = static_cast<int>((i / rec.paths) % na);
    rec.estimate(rec.root_of_row[static_cast<std::size_t>(i)], forced) += rec.path_weight(i, 0) * est_rows(i, 0);
  }
  return rec;
}

/// Differentiable estimate (roots x actions) replaying `rec`. `h0` is the
/// agent's recurrent state at the roots; gradients flow into it as well.
template <AgentModel Model>
ad::Var qa_surrogate(const Model& model, const nn::BoundParams& params, const QaRecord& rec, const ad::Var& h0,
                     const QaConfig& cfg) {
  const Eigen::Index n = rec.rows();
  ad::Var h;
  ad::Var cum;
  ad::Var total;
  double disc = 1.0;
  const int L = static_cast<int>(rec.observations.size());
  for (int k = 0; k < L; ++k) {
    nn::RecurrentOutput<ad::Var> out;
    if (k == 0) {
      auto o = model.step(params, ad::constant(ad::gather_rows(rec.observations[0], detail::first_rows(rec))), h0);
      out = {ad::gather_rows(o.log_probs, rec.root_of_row), o.value, ad::gather_rows(o.hidden, rec.root_of_row)};
    } else {
      out = model.step(params, ad::constant(rec.observations[static_cast<std::size_t>(k)]), h);
    }
    ad::Var lp = ad::pick(out.log_probs, rec.agent_actions[static_cast<std::size_t>(k)]);
    cum = k == 0 ? lp : ad::add(cum, lp);
    ad::Var factor = rec.mode == QaMode::Sample
                         ? magic_box(cum)
                         : ad::scale(ad::exp(cum), std::pow(model.action_count(), -(L - 1 - k)));
    ad::Var term = ad::mul(factor, ad::constant(disc * rec.rewards.col(k)));
    total = k == 0 ? term : ad::add(total, term);
    h = out.hidden;
    disc *= cfg.discount;
  }
  ad::Var result;
  for (int a = 0; a < rec.actions; ++a) {
    ad::Matrix agg = ad::Matrix::Zero(rec.roots, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if ((i / rec.paths) % rec.actions == a) agg(rec.root_of_row[static_cast<std::size_t>(i)], i) = rec.path_weight(i, 0);
    }
    ad::Var col = ad::matmul(ad::constant(std::move(agg)), total);
    result = a == 0 ? col : ad::concat_cols(result, col);
  }
  return result;
}

/// Plain-value probe from a single root.
template <Environment Env, AgentModel Model>
ad::Matrix qa_estimate(const Env& env, const typename Env::State& root, const Model& model,
                       const nn::ParameterVector& params, const ad::Matrix& h0, const QaConfig& cfg, Rng& rng) {
  return qa_simulate(env, std::span<const typename Env::State>(&root, 1), model, params, h0, cfg, rng).estimate;
}

}  // namespace brs
