#pragma once

#include <span>
#include <vector>

#include "brs/common.hpp"

namespace brs {

/// sum_t gamma^t r_t, t from 0.
inline double discounted_return(std::span<const double> rewards, double gamma) {
  double acc = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) acc = rewards[t] + gamma * acc;
  return acc;
}

/// G_t = sum_{k >= t} gamma^(k-t) r_k, plus gamma^(T-t) * bootstrap.
inline std::vector<double> reward_to_go(std::span<const double> rewards, double gamma, double bootstrap = 0.0) {
  std::vector<double> g(rewards.size());
  double acc = bootstrap;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    acc = rewards[t] + gamma * acc;
    g[t] = acc;
  }
  return g;
}

/// Generalized advantage estimates via the backward recursion
/// A_t = delta_t + gamma * lambda * A_{t+1}, delta_t = r_t + gamma V_{t+1} - V_t,
/// with V_T = bootstrap_value.
inline std::vector<double> gae_advantages(std::span<const double> rewards, std::span<const double> values,
                                          double bootstrap_value, double gamma, double lambda) {
  if (values.size() != rewards.size()) throw ConfigError("gae_advantages: values and rewards differ in length");
  if (lambda < 0.0 || lambda > 1.0) throw ConfigError("gae_advantages: lambda must lie in [0, 1]");
  std::vector<double> adv(rewards.size());
  double next_value = bootstrap_value;
  double acc = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    const double delta = rewards[t] + gamma * next_value - values[t];
    acc = delta + gamma * lambda * acc;
    adv[t] = acc;
    next_value = values[t];
  }
  return adv;
}

}  // namespace brs
