#pragma once

// Two-player simultaneous-move games: spec, trajectories, the policy
// interface and the rollout engine.

#include <array>
#include <concepts>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "brs/common.hpp"
#include "brs/core/returns.hpp"

namespace brs {

struct GameSpec {
  int num_players = 2;
  int action_count = 2;
  int episode_length = 1;
  double discount = 1.0;
  int observation_dim = 1;

  void validate() const {
    if (num_players != 2) throw ConfigError("only two-player games are supported");
    if (action_count < 2) throw ConfigError("action_count must be >= 2");
    if (episode_length < 1) throw ConfigError("episode length must be >= 1");
    if (discount < 0.0 || discount > 1.0) throw ConfigError("discount must lie in [0, 1]");
    if (observation_dim < 1) throw ConfigError("observation_dim must be >= 1");
  }
};

/// Per-player outcome of a step, used by behavioural statistics.
enum class Event : int { None = 0, PickedOwn = 1, PickedOther = 2 };

struct StepOutcome {
  std::array<double, 2> rewards{};
  std::array<Event, 2> events{Event::None, Event::None};
};

struct Trajectory {
  std::uint64_t seed = 0;
  std::vector<std::array<std::vector<double>, 2>> observations;
  std::vector<std::array<int, 2>> actions;
  std::vector<std::array<double, 2>> rewards;
  std::vector<std::array<double, 2>> log_probs;
  std::vector<std::array<Event, 2>> events;

  std::size_t length() const { return actions.size(); }

  std::vector<double> rewards_of(int player) const {
    std::vector<double> r(length());
    for (std::size_t t = 0; t < length(); ++t) r[t] = rewards[t][static_cast<std::size_t>(player)];
    return r;
  }

  void validate() const {
    const std::size_t n = length();
    if (observations.size() != n || rewards.size() != n || log_probs.size() != n || events.size() != n) {
      throw ConfigError("trajectory arrays differ in length");
    }
    for (std::size_t t = 0; t < n; ++t) {
      for (int p = 0; p < 2; ++p) {
        if (!std::isfinite(rewards[t][p])) throw NumericError("non-finite reward in trajectory");
        if (!(log_probs[t][p] <= 0.0)) throw NumericError("log-probability above zero or NaN in trajectory");
      }
    }
  }
};

struct ActionChoice {
  int action = 0;
  double log_prob = 0.0;
};

/// A possibly stateful player. `reset` is called at every episode start.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  /// Expected observation length; -1 accepts any.
  virtual int observation_dim() const { return -1; }
  virtual int action_count() const = 0;
  virtual void reset() {}
  virtual ActionChoice act(std::span<const double> obs, Rng& rng) = 0;
  /// Deep copy including episode state (recurrent memory etc.).
  virtual std::unique_ptr<Policy> clone() const = 0;
};

template <class E>
concept Environment = requires(const E& env, typename E::State& s, const typename E::State& cs, Rng& rng,
                               std::array<int, 2> joint) {
  { env.spec() } -> std::convertible_to<GameSpec>;
  { env.reset(rng) } -> std::same_as<typename E::State>;
  { env.step(s, joint, rng) } -> std::same_as<StepOutcome>;
  { env.observe(cs, 0) } -> std::same_as<std::vector<double>>;
};

/// Plays one episode. Randomness comes from three sub-streams of `seed`
/// (environment, player 0, player 1), so equal inputs replay bit for bit.
template <Environment Env>
Trajectory rollout(const Env& env, Policy& a, Policy& b, int horizon, std::uint64_t seed) {
  const GameSpec spec = env.spec();
  if (horizon < 0 || horizon > spec.episode_length) {
    throw ConfigError("horizon " + std::to_string(horizon) + " outside [0, " + std::to_string(spec.episode_length) + "]");
  }
  for (Policy* p : {&a, &b}) {
    if (p->observation_dim() != -1 && p->observation_dim() != spec.observation_dim) {
      throw ConfigError("policy '" + p->name() + "' expects observations of size " +
                        std::to_string(p->observation_dim()) + ", environment emits " +
                        std::to_string(spec.observation_dim));
    }
    if (p->action_count() != spec.action_count) {
      throw ConfigError("policy '" + p->name() + "' has " + std::to_string(p->action_count()) +
                        " actions, environment has " + std::to_string(spec.action_count));
    }
  }
  Rng env_rng = make_rng(seed, "env");
  std::array<Rng, 2> rngs{make_rng(seed, "player", 0), make_rng(seed, "player", 1)};
  Trajectory tr;
  tr.seed = seed;
  auto state = env.reset(env_rng);
  a.reset();
  b.reset();
  for (int t = 0; t < horizon; ++t) {
    std::array<std::vector<double>, 2> obs{env.observe(state, 0), env.observe(state, 1)};
    const ActionChoice ca = a.act(obs[0], rngs[0]);
    const ActionChoice cb = b.act(obs[1], rngs[1]);
    const StepOutcome out = env.step(state, {ca.action, cb.action}, env_rng);
    tr.observations.push_back(std::move(obs));
    tr.actions.push_back({ca.action, cb.action});
    tr.rewards.push_back(out.rewards);
    tr.log_probs.push_back({ca.log_prob, cb.log_prob});
    tr.events.push_back(out.events);
  }
  return tr;
}

struct ReturnSummary {
  std::array<double, 2> discounted_return{};       // mean over episodes
  std::array<double, 2> per_step_mean_return{};    // mean over episodes of (sum r / steps)
  std::array<double, 2> per_step_stderr{std::numeric_limits<double>::quiet_NaN(),
                                        std::numeric_limits<double>::quiet_NaN()};
  int episode_count = 0;
  std::array<std::vector<double>, 2> per_episode;  // per-step mean of each episode
};

inline ReturnSummary summarize(std::span<const Trajectory> episodes, double gamma) {
  ReturnSummary s;
  s.episode_count = static_cast<int>(episodes.size());
  for (int p = 0; p < 2; ++p) {
    auto& per = s.per_episode[static_cast<std::size_t>(p)];
    double disc = 0.0;
    for (const auto& tr : episodes) {
      const auto r = tr.rewards_of(p);
      disc += discounted_return(r, gamma);
      double total = 0.0;
      for (double x : r) total += x;
      per.push_back(r.empty() ? 0.0 : total / static_cast<double>(r.size()));
    }
    if (!episodes.empty()) s.discounted_return[p] = disc / static_cast<double>(episodes.size());
    s.per_step_mean_return[p] = mean_of(per);
    s.per_step_stderr[p] = standard_error(per);
  }
  return s;
}

}  // namespace brs
