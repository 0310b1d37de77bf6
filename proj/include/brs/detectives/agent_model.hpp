#pragma once

// Batched agent models that QA probes and trainers differentiate. A model is
// a stateless description; parameters are passed to every call.
//
//   int hidden_dim() const;
//   int observation_dim() const;
//   int action_count() const;
//   RecurrentOutput<T> step(const P& params, const T& obs, const T& hidden) const;

#include <concepts>

#include "brs/nn/layers.hpp"

namespace brs {

template <class M>
concept AgentModel = requires(const M& m, const nn::PlainParams& p, const nn::BoundParams& bp, const ad::Matrix& x,
                              const ad::Var& v) {
  { m.hidden_dim() } -> std::convertible_to<int>;
  { m.observation_dim() } -> std::convertible_to<int>;
  { m.action_count() } -> std::convertible_to<int>;
  { m.step(p, x, x) } -> std::same_as<nn::RecurrentOutput<ad::Matrix>>;
  { m.step(bp, v, v) } -> std::same_as<nn::RecurrentOutput<ad::Var>>;
};

/// Recurrent actor-critic agent.
struct GruAgentModel {
  nn::GruAgentSpec spec;

  int hidden_dim() const { return spec.hidden; }
  int observation_dim() const { return spec.obs_dim; }
  int action_count() const { return spec.action_count; }

  nn::ParameterVector init(Rng& rng) const { return nn::init_gru_agent(spec, rng); }

  template <class P, class T>
  nn::RecurrentOutput<T> step(const P& p, const T& obs, const T& h) const {
    return nn::gru_agent_step(p, spec, obs, h);
  }
};

/// Memoryless softmax over a linear map of the observation: with one-hot
/// observations this is a tabular policy with one logit row per state.
/// Parameters: "logits" (obs_dim x actions), "values" (obs_dim x 1).
struct TabularAgentModel {
  int obs_dim = 5;
  int actions = 2;

  int hidden_dim() const { return 1; }
  int observation_dim() const { return obs_dim; }
  int action_count() const { return actions; }

  nn::ParameterVector init() const {
    nn::ParameterVector p;
    p.add("logits", ad::Matrix::Zero(obs_dim, actions));
    p.add("values", ad::Matrix::Zero(obs_dim, 1));
    return p;
  }

  template <class P, class T>
  nn::RecurrentOutput<T> step(const P& p, const T& obs, const T& h) const {
    return {ad::log_softmax(ad::matmul(obs, p["logits"])), ad::matmul(obs, p["values"]), h};
  }
};

}  // namespace brs
