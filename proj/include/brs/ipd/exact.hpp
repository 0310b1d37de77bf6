#pragma once

// Exact infinite-horizon discounted values of two memory-one IPD policies.
//
// The joint chain has four states ordered (CC, CD, DC, DD) from player 1's
// perspective. With transition matrix M, start distribution d0 and reward
// vectors r1, r2: V_i = d0 . y_i where (I - gamma M) y_i = r_i.
// I - gamma M is strictly row diagonally dominant for gamma < 1, so Gaussian
// elimination needs no pivoting, which keeps the solve generic over dual
// numbers.

#include <array>
#include <cmath>

#include "brs/common.hpp"
#include "brs/ipd/ipd.hpp"
#include "brs/nn/dual.hpp"

namespace brs::ipd {

template <class T>
struct ExactValues {
  T v1;
  T v2;
};

/// Policies are cooperation probabilities over (START, CC, CD, DC, DD), each
/// from its owner's perspective.
template <class T>
ExactValues<T> exact_memory_one_value(const std::array<T, 5>& p, const std::array<T, 5>& q, double gamma,
                                      const PayoffMatrix& payoff = {}) {
  using nn::primal;
  if (!(gamma >= 0.0)) throw ConfigError("discount must be >= 0");
  if (gamma >= 1.0) throw NumericError("exact value system is singular for discount >= 1");
  const T one(1.0);
  // Probability that each player cooperates after joint state s = 2*a1 + a2.
  std::array<T, 4> pc, qc;
  for (int a1 = 0; a1 < 2; ++a1) {
    for (int a2 = 0; a2 < 2; ++a2) {
      pc[2 * a1 + a2] = p[observation_index(a1, a2)];
      qc[2 * a1 + a2] = q[observation_index(a2, a1)];
    }
  }
  auto joint = [&](const T& x, const T& y, int s) {
    const T px = (s >> 1) == kCooperate ? x : one - x;
    const T py = (s & 1) == kCooperate ? y : one - y;
    return px * py;
  };
  // A = I - gamma M, augmented with both reward columns.
  std::array<std::array<T, 6>, 4> a;
  for (int s = 0; s < 4; ++s) {
    for (int s2 = 0; s2 < 4; ++s2) {
      a[s][s2] = T(s == s2 ? 1.0 : 0.0) - T(gamma) * joint(pc[s], qc[s], s2);
    }
    a[s][4] = T(payoff.reward[s >> 1][s & 1][0]);
    a[s][5] = T(payoff.reward[s >> 1][s & 1][1]);
  }
  for (int k = 0; k < 4; ++k) {
    if (!(std::abs(primal(a[k][k])) > 1e-300)) throw NumericError("exact value solve hit a zero pivot");
    for (int i = k + 1; i < 4; ++i) {
      const T f = a[i][k] / a[k][k];
      for (int j = k; j < 6; ++j) a[i][j] = a[i][j] - f * a[k][j];
    }
  }
  std::array<std::array<T, 2>, 4> y;
  for (int i = 3; i >= 0; --i) {
    for (int c = 0; c < 2; ++c) {
      T acc = a[i][4 + c];
      for (int j = i + 1; j < 4; ++j) acc = acc - a[i][j] * y[j][c];
      y[i][c] = acc / a[i][i];
    }
  }
  ExactValues<T> out{T(0.0), T(0.0)};
  for (int s = 0; s < 4; ++s) {
    const T d0 = joint(p[kStart], q[kStart], s);
    out.v1 = out.v1 + d0 * y[s][0];
    out.v2 = out.v2 + d0 * y[s][1];
  }
  if (!std::isfinite(primal(out.v1)) || !std::isfinite(primal(out.v2))) {
    throw NumericError("exact value solve produced a non-finite value");
  }
  return out;
}

inline ExactValues<double> exact_memory_one_value(const MemoryOnePolicy& p, const MemoryOnePolicy& q, double gamma,
                                                  const PayoffMatrix& payoff = {}) {
  p.validate();
  q.validate();
  return exact_memory_one_value<double>(p.p, q.p, gamma, payoff);
}

}  // namespace brs::ipd
