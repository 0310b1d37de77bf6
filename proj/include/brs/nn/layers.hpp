#pragma once

// Dense MLPs, a GRU cell, and the recurrent actor-critic used by Coin Game
// agents. Forward functions are templated on the parameter view
// (BoundParams or PlainParams) and the value type (ad::Var or Matrix), so the
// same code runs with or without a gradient graph. Rows are batch entries.

#include <string>
#include <vector>

#include "brs/nn/autodiff.hpp"
#include "brs/nn/params.hpp"

namespace brs::nn {

enum class Activation { Tanh, Relu };
enum class Head { Softmax, Bernoulli, Value };

template <class T>
T lift(const Matrix& m);
template <>
inline Matrix lift<Matrix>(const Matrix& m) {
  return m;
}
template <>
inline ad::Var lift<ad::Var>(const Matrix& m) {
  return ad::constant(m);
}

template <class T>
T activate(Activation a, const T& x) {
  return a == Activation::Tanh ? ad::tanh(x) : ad::relu(x);
}

template <class P, class T>
T linear(const P& p, const std::string& prefix, const T& x) {
  return ad::add(ad::matmul(x, p[prefix + ".w"]), p[prefix + ".b"]);
}

inline void init_linear(ParameterVector& p, const std::string& prefix, int in, int out, Rng& rng, bool zero) {
  p.add(prefix + ".w", zero ? Matrix::Zero(in, out) : init_scaled_uniform(in, out, rng));
  p.add(prefix + ".b", Matrix::Zero(1, out));
}

// ---------------------------------------------------------------------------
// MLP

struct MlpSpec {
  std::vector<int> widths;  // input, hidden..., output
  Activation activation = Activation::Tanh;
  Head head = Head::Softmax;

  void validate() const {
    if (widths.size() < 3) throw ConfigError("MLP needs an input, at least one hidden layer and an output");
    for (int w : widths) {
      if (w < 1) throw ConfigError("MLP widths must be >= 1");
    }
    if (head == Head::Bernoulli && widths.back() != 1) throw ConfigError("Bernoulli head needs one output");
    if (head == Head::Softmax && widths.back() < 2) throw ConfigError("softmax head needs >= 2 outputs");
  }
  int input_dim() const { return widths.front(); }
  int output_dim() const { return widths.back(); }
  /// Actions described by the head (a Bernoulli head covers two).
  int action_count() const { return head == Head::Bernoulli ? 2 : output_dim(); }
};

/// Hidden layers scaled-uniform; the last layer is zero when `zero_last`, so
/// a fresh policy is uniform.
inline void init_mlp(ParameterVector& p, const std::string& prefix, const MlpSpec& spec, Rng& rng,
                     bool zero_last = true) {
  spec.validate();
  for (std::size_t i = 0; i + 1 < spec.widths.size(); ++i) {
    const bool last = i + 2 == spec.widths.size();
    init_linear(p, prefix + ".l" + std::to_string(i), spec.widths[i], spec.widths[i + 1], rng, last && zero_last);
  }
}

/// Raw outputs of the last (linear) layer.
template <class P, class T>
T mlp_forward(const P& p, const std::string& prefix, const MlpSpec& spec, const T& x) {
  if (ad::value_of(x).cols() != spec.input_dim()) {
    throw ConfigError("MLP input has " + std::to_string(ad::value_of(x).cols()) + " columns, expected " +
                      std::to_string(spec.input_dim()));
  }
  T h = x;
  const std::size_t layers = spec.widths.size() - 1;
  for (std::size_t i = 0; i < layers; ++i) {
    h = linear(p, prefix + ".l" + std::to_string(i), h);
    if (i + 1 < layers) h = activate(spec.activation, h);
  }
  return h;
}

/// Row-wise action log-probabilities. A Bernoulli head's single logit z gives
/// columns (log sigmoid(z), log sigmoid(-z)); column 0 is action 0.
template <class P, class T>
T mlp_log_policy(const P& p, const std::string& prefix, const MlpSpec& spec, const T& x) {
  T z = mlp_forward(p, prefix, spec, x);
  switch (spec.head) {
    case Head::Softmax:
      return ad::log_softmax(z);
    case Head::Bernoulli:
      return ad::concat_cols(ad::log_sigmoid(z), ad::log_sigmoid(ad::neg(z)));
    case Head::Value:
      break;
  }
  throw ConfigError("value head has no policy");
}

/// Action probabilities for a batch of inputs (plain forward).
inline Matrix forward_policy(const ParameterVector& params, const std::string& prefix, const MlpSpec& spec,
                             const Matrix& x) {
  return ad::exp(mlp_log_policy(PlainParams(params), prefix, spec, x));
}

// ---------------------------------------------------------------------------
// GRU cell (reset gate applied to the recurrent candidate term).

struct GruSpec {
  int input_dim = 1;
  int hidden = 1;
};

inline void init_gru(ParameterVector& p, const std::string& prefix, const GruSpec& s, Rng& rng) {
  p.add(prefix + ".wi", init_scaled_uniform(s.input_dim, 3 * s.hidden, rng));
  Matrix wh(s.hidden, 3 * s.hidden);
  for (int k = 0; k < 3; ++k) wh.middleCols(k * s.hidden, s.hidden) = init_orthogonal(s.hidden, rng);
  p.add(prefix + ".wh", std::move(wh));
  p.add(prefix + ".bi", Matrix::Zero(1, 3 * s.hidden));
  p.add(prefix + ".bh", Matrix::Zero(1, 3 * s.hidden));
}

/// h' = n + z * (h - n), r and z sigmoid gates, n = tanh(x Wn + r * (h Un)).
template <class P, class T>
T gru_step(const P& p, const std::string& prefix, int hidden, const T& x, const T& h) {
  const T gi = ad::add(ad::matmul(x, p[prefix + ".wi"]), p[prefix + ".bi"]);
  const T gh = ad::add(ad::matmul(h, p[prefix + ".wh"]), p[prefix + ".bh"]);
  const T r = ad::sigmoid(ad::add(ad::slice_cols(gi, 0, hidden), ad::slice_cols(gh, 0, hidden)));
  const T z = ad::sigmoid(ad::add(ad::slice_cols(gi, hidden, hidden), ad::slice_cols(gh, hidden, hidden)));
  const T n = ad::tanh(ad::add(ad::slice_cols(gi, 2 * hidden, hidden), ad::mul(r, ad::slice_cols(gh, 2 * hidden, hidden))));
  return ad::add(n, ad::mul(z, ad::sub(h, n)));
}

// ---------------------------------------------------------------------------
// Recurrent actor-critic: two-layer observation encoder, GRU, and separate
// linear policy and value heads.

struct GruAgentSpec {
  int obs_dim = 36;
  int encoder_width = 64;
  int hidden = 64;
  int action_count = 4;
  Activation encoder_activation = Activation::Relu;

  void validate() const {
    if (obs_dim < 1 || encoder_width < 1 || hidden < 1 || action_count < 2) {
      throw ConfigError("recurrent agent dimensions must be positive with >= 2 actions");
    }
  }
};

template <class T>
struct RecurrentOutput {
  T log_probs;  // rows x actions
  T value;      // rows x 1
  T hidden;     // rows x hidden
};

inline void init_encoder(ParameterVector& p, const std::string& prefix, int in, int width, Rng& rng) {
  init_linear(p, prefix + ".l0", in, width, rng, false);
  init_linear(p, prefix + ".l1", width, width, rng, false);
}

template <class P, class T>
T encode(const P& p, const std::string& prefix, Activation act, const T& obs) {
  return activate(act, linear(p, prefix + ".l1", activate(act, linear(p, prefix + ".l0", obs))));
}

inline ParameterVector init_gru_agent(const GruAgentSpec& s, Rng& rng) {
  s.validate();
  ParameterVector p;
  init_encoder(p, "enc", s.obs_dim, s.encoder_width, rng);
  init_gru(p, "gru", {s.encoder_width, s.hidden}, rng);
  init_linear(p, "pi", s.hidden, s.action_count, rng, true);
  init_linear(p, "v", s.hidden, 1, rng, false);
  return p;
}

template <class P, class T>
RecurrentOutput<T> gru_agent_step(const P& p, const GruAgentSpec& s, const T& obs, const T& h) {
  if (ad::value_of(obs).cols() != s.obs_dim) {
    throw ConfigError("agent observation has " + std::to_string(ad::value_of(obs).cols()) + " columns, expected " +
                      std::to_string(s.obs_dim));
  }
  T h2 = gru_step(p, "gru", s.hidden, encode(p, "enc", s.encoder_activation, obs), h);
  return {ad::log_softmax(linear(p, "pi", h2)), linear(p, "v", h2), h2};
}

inline Matrix initial_hidden(Eigen::Index rows, int hidden) { return Matrix::Zero(rows, hidden); }

}  // namespace brs::nn
