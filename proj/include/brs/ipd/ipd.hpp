#pragma once

// Finite iterated prisoner's dilemma. Observations are one-hot over
// (START, CC, CD, DC, DD), own last action first.

#include <array>
#include <span>
#include <string>
#include <vector>

#include "brs/common.hpp"
#include "brs/core/game.hpp"

namespace brs::ipd {

inline constexpr int kCooperate = 0;
inline constexpr int kDefect = 1;
inline constexpr int kNumStates = 5;
enum State5 : int { kStart = 0, kCC = 1, kCD = 2, kDC = 3, kDD = 4 };
inline constexpr std::array<const char*, 5> kStateNames{"START", "CC", "CD", "DC", "DD"};

/// Observation index for (own last action, other last action).
constexpr int observation_index(int own, int other) { return 1 + 2 * own + other; }

/// Role swap: CD <-> DC, everything else fixed.
constexpr int swap_perspective(int s) { return s == kCD ? kDC : s == kDC ? kCD : s; }

/// reward[a][b] = (row player, column player) for row action a, column action b.
struct PayoffMatrix {
  std::array<std::array<std::array<double, 2>, 2>, 2> reward{{
      {{{-1.0, -1.0}, {-3.0, 0.0}}},
      {{{0.0, -3.0}, {-2.0, -2.0}}},
  }};

  bool symmetric() const {
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        if (reward[a][b][0] != reward[b][a][1]) return false;
      }
    }
    return true;
  }
};

struct IpdConfig {
  int length = 6;
  double discount = 1.0;
  PayoffMatrix payoff{};
};

class IpdEnv {
 public:
  struct State {
    std::array<int, 2> last{-1, -1};  // -1 before the first move
    int t = 0;
  };

  IpdEnv() = default;
  explicit IpdEnv(IpdConfig cfg) : cfg_(cfg) { spec().validate(); }

  GameSpec spec() const { return {2, 2, cfg_.length, cfg_.discount, kNumStates}; }
  const IpdConfig& config() const { return cfg_; }

  State reset(Rng&) const { return {}; }

  static int state_index(const State& s, int player) {
    if (s.last[0] < 0) return kStart;
    return player == 0 ? observation_index(s.last[0], s.last[1]) : observation_index(s.last[1], s.last[0]);
  }

  std::vector<double> observe(const State& s, int player) const {
    std::vector<double> o(kNumStates, 0.0);
    o[static_cast<std::size_t>(state_index(s, player))] = 1.0;
    return o;
  }

  StepOutcome step(State& s, std::array<int, 2> joint, Rng&) const {
    for (int a : joint) {
      if (a != kCooperate && a != kDefect) throw ConfigError("IPD action must be 0 (C) or 1 (D)");
    }
    StepOutcome out;
    out.rewards = cfg_.payoff.reward[joint[0]][joint[1]];
    s.last = joint;
    ++s.t;
    return out;
  }

 private:
  IpdConfig cfg_{};
};

/// Decodes a one-hot IPD observation.
inline int decode_observation(std::span<const double> obs) {
  if (obs.size() != kNumStates) throw ConfigError("IPD observation must have 5 entries");
  for (int i = 0; i < kNumStates; ++i) {
    if (obs[static_cast<std::size_t>(i)] > 0.5) return i;
  }
  throw ConfigError("IPD observation is not one-hot");
}

/// Cooperation probability per observation (START, CC, CD, DC, DD).
struct MemoryOnePolicy {
  std::array<double, 5> p{};

  void validate() const {
    for (double x : p) {
      if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("memory-one probabilities must lie in [0, 1]");
    }
  }

  static MemoryOnePolicy tit_for_tat() { return {{1, 1, 0, 1, 0}}; }
  static MemoryOnePolicy cynic_tit_for_tat() { return {{0, 1, 0, 1, 0}}; }
  static MemoryOnePolicy always_cooperate() { return {{1, 1, 1, 1, 1}}; }
  static MemoryOnePolicy always_defect() { return {{0, 0, 0, 0, 0}}; }
};

class MemoryOneAgent final : public Policy {
 public:
  explicit MemoryOneAgent(MemoryOnePolicy pol, std::string label = "memory-one")
      : pol_(pol), label_(std::move(label)) {
    pol_.validate();
  }

  std::string name() const override { return label_; }
  int observation_dim() const override { return kNumStates; }
  int action_count() const override { return 2; }

  ActionChoice act(std::span<const double> obs, Rng& rng) override {
    const double pc = pol_.p[static_cast<std::size_t>(decode_observation(obs))];
    const int a = uniform01(rng) < pc ? kCooperate : kDefect;
    return {a, std::log(a == kCooperate ? pc : 1.0 - pc)};
  }

  std::unique_ptr<Policy> clone() const override { return std::make_unique<MemoryOneAgent>(*this); }
  const MemoryOnePolicy& table() const { return pol_; }

 private:
  MemoryOnePolicy pol_;
  std::string label_;
};

/// Plays `episodes` games of the given length and summarizes them.
inline ReturnSummary finite_ipd_game(const MemoryOnePolicy& a, const MemoryOnePolicy& b, int length = 6,
                                     double gamma = 1.0, int episodes = 1, std::uint64_t seed = 0) {
  if (length < 1) throw ConfigError("IPD length must be >= 1");
  IpdEnv env({length, gamma, {}});
  MemoryOneAgent pa(a), pb(b);
  std::vector<Trajectory> eps;
  for (int i = 0; i < episodes; ++i) eps.push_back(rollout(env, pa, pb, length, derive_seed(seed, "ipd-game", i)));
  return summarize(eps, gamma);
}

}  // namespace brs::ipd
