#pragma once

#include "brs/nn/autodiff.hpp"

namespace brs::nn {

/// Mean Huber loss, quadratic for |residual| <= delta.
inline ad::Var huber_value_loss(const ad::Var& predicted, const ad::Var& target, double delta = 1.0) {
  return ad::huber(predicted, target, delta);
}

/// Row-wise entropy (rows x 1) of distributions given as log-probabilities.
inline ad::Var entropy(const ad::Var& log_probs) {
  return ad::neg(ad::row_sum(ad::mul(ad::exp(log_probs), log_probs)));
}

/// beta times the mean row entropy; zero contributes nothing to the graph.
inline ad::Var entropy_bonus(const ad::Var& log_probs, double beta) {
  if (beta == 0.0) return ad::scalar(0.0);
  return ad::scale(ad::mean(entropy(log_probs)), beta);
}

}  // namespace brs::nn
