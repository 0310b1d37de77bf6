#pragma once

#include <string>

#include "brs/common.hpp"

namespace brs {

enum class RolloutPolicy { Uniform, OwnCoinGreedy };

inline std::string to_string(RolloutPolicy r) { return r == RolloutPolicy::Uniform ? "uniform" : "own-coin-greedy"; }

inline RolloutPolicy parse_rollout_policy(const std::string& s) {
  if (s == "uniform") return RolloutPolicy::Uniform;
  if (s == "own-coin-greedy") return RolloutPolicy::OwnCoinGreedy;
  throw ConfigError("unknown rollout policy '" + s + "' (expected uniform or own-coin-greedy)");
}

/// Search budget for the tree-search opponent. Leaf values use the
/// environment's discount.
struct MctsConfig {
  int simulations = 400;
  int max_depth = 20;
  double exploration = 1.4;
  RolloutPolicy rollout = RolloutPolicy::OwnCoinGreedy;

  void validate() const {
    if (simulations < 1) throw ConfigError("mcts.simulations must be >= 1");
    if (max_depth < 1) throw ConfigError("mcts.max_depth must be >= 1");
    if (!(exploration > 0.0)) throw ConfigError("mcts.exploration must be > 0");
  }
};

}  // namespace brs
