#pragma once

// Open-loop UCT opponent for the Coin Game. Tree nodes are keyed by the
// searcher's own action sequence; the other player's moves and coin respawns
// are resampled in every simulation, with the other player's policy cloned
// at the root so its recurrent state follows the true history plus the
// simulated continuation.
//
// Every simulation from a node runs to the same horizon, so a constant
// per-step reward shift moves all sibling values equally; selection
// normalizes sibling means to [0, 1] and is therefore unaffected.

#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "brs/coin/coin.hpp"
#include "brs/core/game.hpp"
#include "brs/evaluation/mcts_config.hpp"
#include "brs/evaluation/scripted.hpp"

namespace brs::eval {

struct MctsSearchResult {
  int action = 0;
  std::array<int, coin::kNumActions> visits{};
  std::array<double, coin::kNumActions> mean_value{};
};

namespace detail {

struct MctsNode {
  std::array<int, coin::kNumActions> child{-1, -1, -1, -1};
  std::array<int, coin::kNumActions> visits{};
  std::array<double, coin::kNumActions> value_sum{};
  int total = 0;
};

}  // namespace detail

/// Searches from `root` with the searcher in player slot 0. `other` must hold
/// the other player's episode state at the root (it is cloned, not advanced).
/// `reward_shift` is added to every searcher reward; it exists to test the
/// shift invariance.
inline MctsSearchResult mcts_search(const coin::CoinEnv& env, const coin::CoinState& root, const Policy& other,
                                    const MctsConfig& cfg, std::uint64_t seed, double reward_shift = 0.0) {
  cfg.validate();
  const GameSpec spec = env.spec();
  const int remaining = spec.episode_length - root.t;
  if (remaining < 1) throw ConfigError("MCTS called at or after the end of the episode");
  const int horizon = std::min(cfg.max_depth, remaining);
  const double gamma = spec.discount;
  const int grid = env.config().grid;

  std::vector<detail::MctsNode> tree(1);
  Rng rng = make_rng(seed, "mcts");
  for (int sim = 0; sim < cfg.simulations; ++sim) {
    coin::CoinState s = root;
    std::unique_ptr<Policy> opp = other.clone();
    std::vector<std::pair<int, int>> path;  // (node, action)
    std::vector<double> rewards;
    int node = 0;
    bool in_tree = true;
    for (int d = 0; d < horizon; ++d) {
      int a;
      if (in_tree) {
        auto& n = tree[static_cast<std::size_t>(node)];
        a = -1;
        for (int k = 0; k < coin::kNumActions && a < 0; ++k) {
          if (n.visits[static_cast<std::size_t>(k)] == 0) a = k;
        }
        if (a < 0) {
          double lo = std::numeric_limits<double>::infinity(), hi = -lo;
          for (int k = 0; k < coin::kNumActions; ++k) {
            const double m = n.value_sum[static_cast<std::size_t>(k)] / n.visits[static_cast<std::size_t>(k)];
            lo = std::min(lo, m);
            hi = std::max(hi, m);
          }
          double best = -std::numeric_limits<double>::infinity();
          for (int k = 0; k < coin::kNumActions; ++k) {
            const double m = n.value_sum[static_cast<std::size_t>(k)] / n.visits[static_cast<std::size_t>(k)];
            const double q = hi > lo ? (m - lo) / (hi - lo) : 0.5;
            const double u = q + cfg.exploration * std::sqrt(std::log(static_cast<double>(n.total)) /
                                                             n.visits[static_cast<std::size_t>(k)]);
            if (u > best) {
              best = u;
              a = k;
            }
          }
        }
        path.emplace_back(node, a);
        const bool fresh = n.visits[static_cast<std::size_t>(a)] == 0;
        if (fresh) in_tree = false;  // expand one edge, then play out
        else {
          if (tree[static_cast<std::size_t>(node)].child[static_cast<std::size_t>(a)] < 0) {
            tree[static_cast<std::size_t>(node)].child[static_cast<std::size_t>(a)] = static_cast<int>(tree.size());
            tree.emplace_back();
          }
          node = tree[static_cast<std::size_t>(node)].child[static_cast<std::size_t>(a)];
        }
      } else {
        const auto v = env.decode(env.observe(s, 0));
        a = cfg.rollout == RolloutPolicy::Uniform ? uniform_int(rng, coin::kNumActions)
                                                  : always_cooperate_action(v, grid);
      }
      const int b = opp->act(env.observe(s, 1), rng).action;
      const StepOutcome out = env.step(s, {a, b}, rng);
      rewards.push_back(out.rewards[0] + reward_shift);
    }
    // Discounted return from each path node onward.
    std::vector<double> tail(rewards.size() + 1, 0.0);
    for (std::size_t i = rewards.size(); i-- > 0;) tail[i] = rewards[i] + gamma * tail[i + 1];
    for (std::size_t i = 0; i < path.size(); ++i) {
      auto& n = tree[static_cast<std::size_t>(path[i].first)];
      const auto k = static_cast<std::size_t>(path[i].second);
      ++n.visits[k];
      ++n.total;
      n.value_sum[k] += tail[i];
    }
  }

  MctsSearchResult res;
  const auto& r = tree[0];
  res.visits = r.visits;
  int best = 0;
  for (int k = 0; k < coin::kNumActions; ++k) {
    const auto i = static_cast<std::size_t>(k);
    res.mean_value[i] = r.visits[i] > 0 ? r.value_sum[i] / r.visits[i] : 0.0;
    if (r.visits[i] > r.visits[static_cast<std::size_t>(best)]) best = k;
  }
  res.action = best;
  return res;
}

/// The searcher as a Policy. It reconstructs the full state from its own
/// observation and step counter and keeps a private copy of the other player
/// in sync by feeding it the other player's observations; recurrent and
/// scripted opponents only update their memory from observations, so the
/// copy's state matches the real opponent's.
class MctsPolicy final : public Policy {
 public:
  MctsPolicy(coin::CoinConfig env, std::unique_ptr<Policy> other, MctsConfig cfg, std::uint64_t seed)
      : env_(env), prototype_(std::move(other)), cfg_(cfg), seed_(seed) {
    cfg_.validate();
    if (!prototype_) throw ConfigError("MCTS needs a model of the other player");
    reset();
  }
  MctsPolicy(const MctsPolicy& o)
      : Policy(o), env_(o.env_), prototype_(o.prototype_->clone()), tracker_(o.tracker_->clone()), cfg_(o.cfg_),
        seed_(o.seed_), t_(o.t_), episode_(o.episode_) {}

  std::string name() const override { return "MCTS"; }
  int observation_dim() const override { return env_.spec().observation_dim; }
  int action_count() const override { return coin::kNumActions; }

  void reset() override {
    tracker_ = prototype_->clone();
    tracker_->reset();
    t_ = 0;
    ++episode_;
  }

  ActionChoice act(std::span<const double> obs, Rng& rng) override {
    const coin::CoinState s = env_.from_view(env_.decode(obs), t_);
    const std::uint64_t search_seed = derive_seed(seed_ ^ rng(), "mcts-move", static_cast<std::uint64_t>(t_));
    const MctsSearchResult r = mcts_search(env_, s, *tracker_, cfg_, search_seed);
    Rng sink(0);
    tracker_->act(env_.observe(s, 1), sink);
    ++t_;
    return {r.action, 0.0};
  }

  std::unique_ptr<Policy> clone() const override { return std::make_unique<MctsPolicy>(*this); }

 private:
  coin::CoinEnv env_;
  std::unique_ptr<Policy> prototype_;
  std::unique_ptr<Policy> tracker_;
  MctsConfig cfg_;
  std::uint64_t seed_;
  int t_ = 0;
  long episode_ = 0;
};

}  // namespace brs::eval
