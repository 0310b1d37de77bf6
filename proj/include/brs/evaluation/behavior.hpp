#pragma once

// Conditional cooperation statistics over Coin Game trajectories.
//
// Two readings of "a turn":
//   Pickup: a player's turns are its coin pickups. Taking its own coin is
//     cooperation, taking the other's coin is defection. Conditions look at
//     the opponent's most recent pickup strictly before the current one.
//   Step: every time step is a turn; a player defects on a step when it
//     takes the other's coin and cooperates otherwise. Conditions look at
//     the previous step.
// In both modes "opponent defected and agent cooperated" means the agent's
// previous turn was cooperative and the opponent defected after it (or on
// the same step).

#include <array>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "brs/core/game.hpp"

namespace brs::eval {

enum class TurnMode { Pickup, Step };

struct Frequency {
  long cooperated = 0;
  long count = 0;
  /// NaN when the condition never occurred.
  double probability() const { return count > 0 ? static_cast<double>(cooperated) / count : std::nan(""); }
  void add(bool coop) {
    ++count;
    if (coop) ++cooperated;
  }
};

struct BehaviorStats {
  Frequency start;
  Frequency after_opp_cooperated;
  Frequency after_opp_defected;
  Frequency after_opp_defected_agent_cooperated;
  /// Retaliation table: after "agent cooperated, opponent defected", how
  /// often the agent's next turn was cooperation vs defection.
  long retaliated = 0;
  long forgave = 0;

  nlohmann::json to_json() const {
    auto f = [](const Frequency& x) {
      const double p = x.probability();
      return nlohmann::json{{"p_cooperate", std::isfinite(p) ? nlohmann::json(p) : nlohmann::json(nullptr)},
                            {"count", x.count}};
    };
    return {{"start", f(start)},
            {"opp_cooperated", f(after_opp_cooperated)},
            {"opp_defected", f(after_opp_defected)},
            {"opp_defected_agent_cooperated", f(after_opp_defected_agent_cooperated)},
            {"retaliation", {{"defect_next", retaliated}, {"cooperate_next", forgave}}}};
  }
};

struct Turn {
  int t = 0;
  bool cooperate = true;
};

inline std::vector<Turn> turns_of(const Trajectory& tr, int player, TurnMode mode) {
  std::vector<Turn> out;
  for (std::size_t t = 0; t < tr.events.size(); ++t) {
    const Event e = tr.events[t][static_cast<std::size_t>(player)];
    if (mode == TurnMode::Step) {
      out.push_back({static_cast<int>(t), e != Event::PickedOther});
    } else if (e != Event::None) {
      out.push_back({static_cast<int>(t), e == Event::PickedOwn});
    }
  }
  return out;
}

/// Accumulates statistics for `player` (the agent) against the other slot.
inline void accumulate_behavior(BehaviorStats& st, const Trajectory& tr, int player, TurnMode mode) {
  const auto mine = turns_of(tr, player, mode);
  const auto theirs = turns_of(tr, 1 - player, mode);
  std::size_t j = 0;  // theirs[0, j) happened strictly before the current turn
  for (std::size_t k = 0; k < mine.size(); ++k) {
    const Turn& cur = mine[k];
    while (j < theirs.size() && theirs[j].t < cur.t) ++j;
    if (k == 0) st.start.add(cur.cooperate);
    if (j == 0) continue;
    const Turn& opp = theirs[j - 1];
    if (mode == TurnMode::Step && opp.t != cur.t - 1) continue;
    (opp.cooperate ? st.after_opp_cooperated : st.after_opp_defected).add(cur.cooperate);
    if (k > 0 && mine[k - 1].cooperate && !opp.cooperate && opp.t >= mine[k - 1].t) {
      st.after_opp_defected_agent_cooperated.add(cur.cooperate);
      ++(cur.cooperate ? st.forgave : st.retaliated);
    }
  }
}

inline BehaviorStats behavior_stats(std::span<const Trajectory> trajectories, int player = 0,
                                    TurnMode mode = TurnMode::Pickup) {
  BehaviorStats st;
  for (const auto& tr : trajectories) accumulate_behavior(st, tr, player, mode);
  return st;
}

/// One CSV row per agent in the column order of the published table.
inline std::string behavior_csv(const std::vector<std::pair<std::string, BehaviorStats>>& rows) {
  std::ostringstream os;
  os << "agent,p_coop_start,p_coop_opp_coop,p_coop_opp_defect,p_coop_opp_defect_agent_coop,"
        "n_start,n_opp_coop,n_opp_defect,n_opp_defect_agent_coop\n";
  auto p = [](const Frequency& f) {
    const double x = f.probability();
    std::ostringstream s;
    if (std::isfinite(x)) {
      s.precision(4);
      s << std::fixed << x;
    }
    return s.str();
  };
  for (const auto& [name, s] : rows) {
    os << name << "," << p(s.start) << "," << p(s.after_opp_cooperated) << "," << p(s.after_opp_defected) << ","
       << p(s.after_opp_defected_agent_cooperated) << "," << s.start.count << "," << s.after_opp_cooperated.count
       << "," << s.after_opp_defected.count << "," << s.after_opp_defected_agent_cooperated.count << "\n";
  }
  return os.str();
}

}  // namespace brs::eval
