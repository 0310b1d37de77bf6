#pragma once

// Detective network: the agent-style recurrent encoder summarizes the
// detective's own observation history; its state is concatenated with the QA
// vector and passed through a two-layer ReLU trunk feeding linear actor and
// critic heads. The agent enters only through the QA vector.

#include "brs/nn/layers.hpp"

namespace brs {

struct DetectiveSpec {
  int obs_dim = 36;
  int encoder_width = 64;
  int hidden = 64;
  int action_count = 4;
  int qa_dim = 4;
  int trunk_width = 64;
  nn::Activation encoder_activation = nn::Activation::Relu;

  void validate() const {
    if (obs_dim < 1 || encoder_width < 1 || hidden < 1 || qa_dim < 1 || trunk_width < 1 || action_count < 2) {
      throw ConfigError("detective dimensions must be positive with >= 2 actions");
    }
  }
};

template <class T>
struct DetectiveHeads {
  T log_probs;  // rows x actions
  T value;      // rows x 1
};

inline nn::ParameterVector init_detective(const DetectiveSpec& s, Rng& rng) {
  s.validate();
  nn::ParameterVector p;
  nn::init_encoder(p, "enc", s.obs_dim, s.encoder_width, rng);
  nn::init_gru(p, "gru", {s.encoder_width, s.hidden}, rng);
  nn::init_linear(p, "trunk.l0", s.hidden + s.qa_dim, s.trunk_width, rng, false);
  nn::init_linear(p, "trunk.l1", s.trunk_width, s.trunk_width, rng, false);
  nn::init_linear(p, "pi", s.trunk_width, s.action_count, rng, true);
  nn::init_linear(p, "v", s.trunk_width, 1, rng, false);
  return p;
}

/// Advances the recurrent state by one observation.
template <class P, class T>
T detective_encode(const P& p, const DetectiveSpec& s, const T& obs, const T& h) {
  if (ad::value_of(obs).cols() != s.obs_dim) throw ConfigError("detective observation has the wrong width");
  return nn::gru_step(p, "gru", s.hidden, nn::encode(p, "enc", s.encoder_activation, obs), h);
}

/// Actor and critic from the recurrent state and the (scaled) QA vector.
template <class P, class T>
DetectiveHeads<T> detective_heads(const P& p, const DetectiveSpec& s, const T& h, const T& qa) {
  if (ad::value_of(qa).cols() != s.qa_dim) throw ConfigError("QA vector has the wrong width");
  T z = ad::relu(nn::linear(p, "trunk.l1", ad::relu(nn::linear(p, "trunk.l0", ad::concat_cols(h, qa)))));
  return {ad::log_softmax(nn::linear(p, "pi", z)), nn::linear(p, "v", z)};
}

/// Action distribution for one step (plain forward). `h` is the recurrent
/// state after the current observation.
inline ad::Matrix detective_act(const nn::ParameterVector& params, const DetectiveSpec& s, const ad::Matrix& h,
                                const ad::Matrix& qa_input) {
  return ad::exp(detective_heads(nn::PlainParams(params), s, h, qa_input).log_probs);
}

}  // namespace brs
