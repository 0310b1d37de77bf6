#pragma once

// Tree-search best response for short two-action iterated games.
//
// The agent acts once per tree node, sampled from its memory-one policy; the
// detective branches on both of its actions beneath every sample. The
// detective's reply is the leaf path maximizing its own return (first found
// in depth-first, cooperate-before-defect order). Every sampled agent action
// in the tree contributes its log-probability to the REINFORCE update, not
// only those on the chosen path.

#include <array>
#include <cmath>
#include <vector>

#include "brs/common.hpp"
#include "brs/ipd/ipd.hpp"

namespace brs {

struct TsdResult {
  std::vector<int> detective_actions;  // chosen path
  std::vector<int> agent_actions;      // agent samples along the chosen path
  double detective_return = 0.0;
  double agent_return = 0.0;
  double log_prob_sum = 0.0;  // over every agent node in the tree
  int agent_nodes = 0;
  /// counts[s][a]: how often the agent took action a at observation s.
  std::array<std::array<int, 2>, ipd::kNumStates> counts{};
  bool tie = false;  // another path reached the same detective return
};

namespace detail {

struct TsdSearch {
  const std::array<double, ipd::kNumStates>& p;
  const ipd::PayoffMatrix& payoff;
  int depth;
  Rng& rng;
  TsdResult result;
  bool have_best = false;
  std::vector<int> det_path, agent_path;

  void visit(int state, int t, double ret_agent, double ret_det) {
    if (t == depth) {
      if (!have_best || ret_det > result.detective_return) {
        have_best = true;
        result.tie = false;
        result.detective_return = ret_det;
        result.agent_return = ret_agent;
        result.detective_actions = det_path;
        result.agent_actions = agent_path;
      } else if (ret_det == result.detective_return) {
        result.tie = true;
      }
      return;
    }
    const double pc = p[static_cast<std::size_t>(state)];
    const int a = uniform01(rng) < pc ? ipd::kCooperate : ipd::kDefect;
    result.log_prob_sum += std::log(a == ipd::kCooperate ? pc : 1.0 - pc);
    ++result.counts[static_cast<std::size_t>(state)][static_cast<std::size_t>(a)];
    ++result.agent_nodes;
    for (int b : {ipd::kCooperate, ipd::kDefect}) {
      const auto& r = payoff.reward[a][b];
      det_path.push_back(b);
      agent_path.push_back(a);
      visit(ipd::observation_index(a, b), t + 1, ret_agent + r[0], ret_det + r[1]);
      det_path.pop_back();
      agent_path.pop_back();
    }
  }
};

}  // namespace detail

inline constexpr int kMaxTsdDepth = 12;

/// `p_cooperate` is the agent's cooperation probability per observation
/// (START, CC, CD, DC, DD). Returns are undiscounted.
inline TsdResult tsd_best_response(const std::array<double, ipd::kNumStates>& p_cooperate, int depth, Rng& rng,
                                   const ipd::PayoffMatrix& payoff = {}) {
  if (depth < 1 || depth > kMaxTsdDepth) {
    throw ConfigError("TSD depth must lie in [1, " + std::to_string(kMaxTsdDepth) + "]");
  }
  for (double x : p_cooperate) {
    if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("TSD agent probabilities must lie in [0, 1]");
  }
  detail::TsdSearch search{p_cooperate, payoff, depth, rng, {}, false, {}, {}};
  search.visit(ipd::kStart, 0, 0.0, 0.0);
  return search.result;
}

}  // namespace brs
