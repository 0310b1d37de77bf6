#pragma once

// Score-function surrogates. Differentiating a surrogate gives the
// REINFORCE / DiCE gradient estimate; forward values are diagnostics only.

#include "brs/common.hpp"
#include "brs/nn/autodiff.hpp"

namespace brs {

/// exp(x - stop_gradient(x)): evaluates to exactly 1, differentiates like x.
inline ad::Var magic_box(const ad::Var& x) { return ad::exp(ad::sub(x, ad::stop_gradient(x))); }

enum class Reduction { Mean, Sum };

/// sum over entries of (weight - baseline) * log_prob, divided by the row
/// count under Reduction::Mean. `weights` has the shape of `log_probs`, or is
/// a column broadcast across a row (one return per episode).
inline ad::Var reinforce_surrogate(const ad::Var& log_probs, const ad::Matrix& weights, double baseline = 0.0,
                                   Reduction reduction = Reduction::Mean) {
  if (!log_probs.value().allFinite()) throw NumericError("reinforce_surrogate: non-finite log-probabilities");
  if (!weights.allFinite()) throw NumericError("reinforce_surrogate: non-finite weights");
  const bool same = weights.rows() == log_probs.rows() && weights.cols() == log_probs.cols();
  const bool column = weights.rows() == log_probs.rows() && weights.cols() == 1;
  if (!same && !column) throw ConfigError("reinforce_surrogate: weights must match log_probs or be one per row");
  ad::Var w = ad::constant((weights.array() - baseline).matrix());
  ad::Var total = ad::sum(ad::mul(log_probs, w));
  if (reduction == Reduction::Mean) total = ad::scale(total, 1.0 / static_cast<double>(log_probs.rows()));
  return total;
}

}  // namespace brs
