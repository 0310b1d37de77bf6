#pragma once

// Scripted Coin Game opponents. All of them read the standard observation,
// so they can sit in either player slot.

#include <memory>
#include <optional>
#include <string>

#include "brs/coin/coin.hpp"
#include "brs/core/game.hpp"

namespace brs::eval {

/// Shortest path to the coin whatever its colour.
inline int always_defect_action(const coin::CoinView& v, int grid) {
  return coin::shortest_path_action(v.self, v.coin, grid);
}

/// Own coin: shortest path onto it. Other's coin: keep closing in along a
/// shortest path but never step onto the coin cell.
inline int always_cooperate_action(const coin::CoinView& v, int grid) {
  if (v.coin_is_mine) return coin::shortest_path_action(v.self, v.coin, grid);
  return coin::shortest_path_action(v.self, v.coin, grid, v.coin);
}

class ScriptedCoinPolicy : public Policy {
 public:
  explicit ScriptedCoinPolicy(coin::CoinConfig cfg) : env_(cfg) {}
  int observation_dim() const override { return env_.spec().observation_dim; }
  int action_count() const override { return coin::kNumActions; }

 protected:
  coin::CoinView view(std::span<const double> obs) const { return env_.decode(obs); }
  int grid() const { return env_.config().grid; }
  coin::CoinEnv env_;
};

class AlwaysDefect final : public ScriptedCoinPolicy {
 public:
  using ScriptedCoinPolicy::ScriptedCoinPolicy;
  std::string name() const override { return "AD"; }
  ActionChoice act(std::span<const double> obs, Rng&) override { return {always_defect_action(view(obs), grid()), 0.0}; }
  std::unique_ptr<Policy> clone() const override { return std::make_unique<AlwaysDefect>(*this); }
};

class AlwaysCooperate final : public ScriptedCoinPolicy {
 public:
  using ScriptedCoinPolicy::ScriptedCoinPolicy;
  std::string name() const override { return "AC"; }
  ActionChoice act(std::span<const double> obs, Rng&) override {
    return {always_cooperate_action(view(obs), grid()), 0.0};
  }
  std::unique_ptr<Policy> clone() const override { return std::make_unique<AlwaysCooperate>(*this); }
};

class UniformRandom final : public ScriptedCoinPolicy {
 public:
  using ScriptedCoinPolicy::ScriptedCoinPolicy;
  std::string name() const override { return "random"; }
  ActionChoice act(std::span<const double>, Rng& rng) override {
    return {uniform_int(rng, coin::kNumActions), -std::log(static_cast<double>(coin::kNumActions))};
  }
  std::unique_ptr<Policy> clone() const override { return std::make_unique<UniformRandom>(*this); }
};

/// Plays AD with probability `p_defect` at every step, AC otherwise.
class MixedPolicy final : public ScriptedCoinPolicy {
 public:
  MixedPolicy(coin::CoinConfig cfg, double p_defect) : ScriptedCoinPolicy(cfg), p_(p_defect) {
    if (!(p_ >= 0.0 && p_ <= 1.0)) throw ConfigError("mixed policy defect probability must lie in [0, 1]");
  }
  std::string name() const override { return "mixed(" + std::to_string(p_) + ")"; }
  ActionChoice act(std::span<const double> obs, Rng& rng) override {
    const auto v = view(obs);
    return {uniform01(rng) < p_ ? always_defect_action(v, grid()) : always_cooperate_action(v, grid()), 0.0};
  }
  std::unique_ptr<Policy> clone() const override { return std::make_unique<MixedPolicy>(*this); }

 private:
  double p_;
};

/// Cooperates until the other player takes one of its coins, then defects
/// for the rest of the episode. A pickup is detected when the other player
/// stands where this player's coin was on the previous step.
class GrimRetaliator final : public ScriptedCoinPolicy {
 public:
  using ScriptedCoinPolicy::ScriptedCoinPolicy;
  std::string name() const override { return "grim"; }
  void reset() override {
    triggered_ = false;
    prev_.reset();
  }
  bool triggered() const { return triggered_; }

  ActionChoice act(std::span<const double> obs, Rng&) override {
    const auto v = view(obs);
    if (prev_ && prev_->coin_is_mine && v.other == prev_->coin) triggered_ = true;
    prev_ = v;
    return {triggered_ ? always_defect_action(v, grid()) : always_cooperate_action(v, grid()), 0.0};
  }
  std::unique_ptr<Policy> clone() const override { return std::make_unique<GrimRetaliator>(*this); }

 private:
  bool triggered_ = false;
  std::optional<coin::CoinView> prev_;
};

}  // namespace brs::eval
