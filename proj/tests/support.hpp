#pragma once

// Shared oracles for the test suites.

#include <algorithm>
#include <cmath>
#include <functional>

#include "brs/nn/params.hpp"

namespace brs::testing {

/// Central finite differences of f at every scalar entry of `params`.
inline nn::ParameterVector finite_difference(const std::function<double(const nn::ParameterVector&)>& f,
                                             const nn::ParameterVector& params, double eps = 1e-5) {
  nn::ParameterVector g = params.zeros_like();
  nn::ParameterVector p = params;
  for (std::size_t e = 0; e < p.size(); ++e) {
    auto& v = p.entries()[e].value;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double x = v.data()[i];
      v.data()[i] = x + eps;
      const double up = f(p);
      v.data()[i] = x - eps;
      const double down = f(p);
      v.data()[i] = x;
      g.entries()[e].value.data()[i] = (up - down) / (2.0 * eps);
    }
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||), zero when both vanish.
inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max(a.norm(), b.norm());
  if (scale == 0.0) return 0.0;
  return (a - b).norm() / scale;
}

inline double relative_error(const nn::ParameterVector& a, const nn::ParameterVector& b) {
  return relative_error(a.flatten(), b.flatten());
}

inline double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.dot(b) / (a.norm() * b.norm());
}

}  // namespace brs::testing
