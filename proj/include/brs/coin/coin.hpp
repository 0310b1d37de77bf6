#pragma once

// Two-player Coin Game on a toroidal grid. Player 0 is red, player 1 blue.
// Cells are row-major, actions move (row, col) by Right (0,+1), Left (0,-1),
// Down (+1,0), Up (-1,0) with wraparound.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "brs/common.hpp"
#include "brs/core/game.hpp"

namespace brs::coin {

enum Move : int { kRight = 0, kLeft = 1, kDown = 2, kUp = 3 };
inline constexpr int kNumActions = 4;
inline constexpr std::array<std::array<int, 2>, 4> kMoveDelta{{{0, 1}, {0, -1}, {1, 0}, {-1, 0}}};
inline constexpr std::array<const char*, 4> kMoveNames{"right", "left", "down", "up"};

struct CoinConfig {
  int grid = 3;
  int length = 50;
  double discount = 0.96;
  /// Respawned coins take the opposite colour of the collected one instead of
  /// a uniformly random colour.
  bool alternate_colors = false;

  void validate() const {
    if (grid < 2) throw ConfigError("coin grid must be at least 2x2");
    if (grid * grid < 3) throw ConfigError("coin grid needs room for two players and a coin");
    if (length < 1) throw ConfigError("coin episode length must be >= 1");
    if (discount < 0.0 || discount > 1.0) throw ConfigError("coin discount must lie in [0, 1]");
  }
};

struct CoinState {
  std::array<int, 2> pos{};
  int coin_pos = 0;
  int coin_color = 0;  // index of the player who owns the coin
  int t = 0;
};

inline int move_cell(int cell, int action, int grid) {
  if (action < 0 || action >= kNumActions) throw ConfigError("invalid coin action " + std::to_string(action));
  const int r = (cell / grid + kMoveDelta[action][0] + grid) % grid;
  const int c = (cell % grid + kMoveDelta[action][1] + grid) % grid;
  return r * grid + c;
}

inline int torus_distance(int a, int b, int grid) {
  const int dr = std::abs(a / grid - b / grid);
  const int dc = std::abs(a % grid - b % grid);
  return std::min(dr, grid - dr) + std::min(dc, grid - dc);
}

/// First action (in Right, Left, Down, Up order) that shortens the toroidal
/// distance to `to` without landing on `forbidden`; if none exists, the first
/// action not landing on `forbidden`.
inline int shortest_path_action(int from, int to, int grid, std::optional<int> forbidden = std::nullopt) {
  const int d = torus_distance(from, to, grid);
  for (int a = 0; a < kNumActions; ++a) {
    const int n = move_cell(from, a, grid);
    if (torus_distance(n, to, grid) == d - 1 && n != forbidden) return a;
  }
  for (int a = 0; a < kNumActions; ++a) {
    if (move_cell(from, a, grid) != forbidden) return a;
  }
  return kRight;
}

/// Positions and coin as seen by one player.
struct CoinView {
  int self = 0;
  int other = 0;
  int coin = 0;
  bool coin_is_mine = false;
};

class CoinEnv {
 public:
  using State = CoinState;

  CoinEnv() = default;
  explicit CoinEnv(CoinConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  const CoinConfig& config() const { return cfg_; }
  int cells() const { return cfg_.grid * cfg_.grid; }
  GameSpec spec() const { return {2, kNumActions, cfg_.length, cfg_.discount, 4 * cells()}; }

  CoinState reset(Rng& rng) const {
    CoinState s;
    const int n = cells();
    s.pos[0] = uniform_int(rng, n);
    s.pos[1] = uniform_int(rng, n - 1);
    if (s.pos[1] >= s.pos[0]) ++s.pos[1];
    s.coin_pos = spawn_cell(s, rng);
    s.coin_color = uniform_int(rng, 2);
    return s;
  }

  StepOutcome step(CoinState& s, std::array<int, 2> joint, Rng& rng) const {
    for (int p = 0; p < 2; ++p) s.pos[p] = move_cell(s.pos[p], joint[p], cfg_.grid);
    StepOutcome out;
    bool picked = false;
    for (int p = 0; p < 2; ++p) {
      if (s.pos[p] != s.coin_pos) continue;
      picked = true;
      out.rewards[p] += 1.0;
      if (s.coin_color == p) {
        out.events[p] = Event::PickedOwn;
      } else {
        out.events[p] = Event::PickedOther;
        out.rewards[1 - p] -= 2.0;
      }
    }
    if (picked) {
      const int collected = s.coin_color;
      s.coin_pos = spawn_cell(s, rng);
      s.coin_color = cfg_.alternate_colors ? 1 - collected : uniform_int(rng, 2);
    }
    ++s.t;
    return out;
  }

  /// Channels: self position, other position, own-colour coin, other-colour
  /// coin; each a row-major grid.
  std::vector<double> observe(const CoinState& s, int player) const {
    const int n = cells();
    std::vector<double> o(static_cast<std::size_t>(4 * n), 0.0);
    o[static_cast<std::size_t>(s.pos[player])] = 1.0;
    o[static_cast<std::size_t>(n + s.pos[1 - player])] = 1.0;
    const int ch = s.coin_color == player ? 2 : 3;
    o[static_cast<std::size_t>(ch * n + s.coin_pos)] = 1.0;
    return o;
  }

  CoinView decode(std::span<const double> obs) const {
    const int n = cells();
    if (static_cast<int>(obs.size()) != 4 * n) throw ConfigError("coin observation has the wrong size");
    CoinView v;
    int found = 0;
    for (int i = 0; i < 4 * n; ++i) {
      if (obs[static_cast<std::size_t>(i)] < 0.5) continue;
      const int ch = i / n;
      const int cell = i % n;
      if (ch == 0) v.self = cell;
      if (ch == 1) v.other = cell;
      if (ch >= 2) {
        v.coin = cell;
        v.coin_is_mine = ch == 2;
      }
      ++found;
    }
    if (found != 3) throw ConfigError("coin observation must have exactly three set cells");
    return v;
  }

  /// State seen from `player`'s side with that player placed in slot 0.
  CoinState from_view(const CoinView& v, int t = 0) const {
    CoinState s;
    s.pos = {v.self, v.other};
    s.coin_pos = v.coin;
    s.coin_color = v.coin_is_mine ? 0 : 1;
    s.t = t;
    return s;
  }

  static CoinState swap_roles(const CoinState& s) {
    CoinState r = s;
    std::swap(r.pos[0], r.pos[1]);
    r.coin_color = 1 - s.coin_color;
    return r;
  }

 private:
  int spawn_cell(const CoinState& s, Rng& rng) const {
    const int n = cells();
    const int blocked = s.pos[0] == s.pos[1] ? 1 : 2;
    int k = uniform_int(rng, n - blocked);
    for (int c = 0; c < n; ++c) {
      if (c == s.pos[0] || c == s.pos[1]) continue;
      if (k-- == 0) return c;
    }
    return 0;
  }

  CoinConfig cfg_{};
};

}  // namespace brs::coin
