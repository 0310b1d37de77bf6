#pragma once

// Head-to-head games and all-pairs leagues with CSV, JSON and SVG output.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "brs/common.hpp"
#include "brs/core/game.hpp"

namespace brs::eval {

/// `n_games` independent games; game g uses seed derive_seed(seed, "game", g).
template <Environment Env>
std::vector<Trajectory> play_games(const Env& env, const Policy& a, const Policy& b, int n_games, std::uint64_t seed,
                                   int workers = 1) {
  if (n_games < 1) throw ConfigError("need at least one game");
  std::vector<Trajectory> out(static_cast<std::size_t>(n_games));
  parallel_for(out.size(), workers, [&](std::size_t g) {
    auto pa = a.clone();
    auto pb = b.clone();
    out[g] = rollout(env, *pa, *pb, env.spec().episode_length, derive_seed(seed, "game", g));
  });
  return out;
}

template <Environment Env>
ReturnSummary run_matchup(const Env& env, const Policy& a, const Policy& b, int n_games, std::uint64_t seed,
                          int workers = 1) {
  const auto games = play_games(env, a, b, n_games, seed, workers);
  return summarize(games, env.spec().discount);
}

/// A league participant. `make(other)` builds the policy for a game against
/// `other`; only search-based entries look at it.
struct LeagueEntry {
  std::string label;
  bool is_search = false;
  std::function<std::unique_ptr<Policy>(const Policy* other)> make;
};

struct LeagueCell {
  bool played = false;
  double mean = std::nan("");
  double stderr_ = std::nan("");
  int n = 0;
  std::vector<double> per_game;
};

struct LeagueResult {
  std::vector<std::string> labels;
  std::vector<std::vector<LeagueCell>> cells;  // [row = focal][col = opponent]

  std::string to_csv() const {
    std::ostringstream os;
    os << "focal,opponent,mean,stderr,n\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
      for (std::size_t j = 0; j < labels.size(); ++j) {
        const auto& c = cells[i][j];
        if (!c.played) continue;
        os << labels[i] << "," << labels[j] << "," << c.mean << ",";
        if (std::isfinite(c.stderr_)) os << c.stderr_;
        os << "," << c.n << "\n";
      }
    }
    return os.str();
  }

  nlohmann::json to_json() const {
    nlohmann::json cellsj = nlohmann::json::array();
    for (std::size_t i = 0; i < labels.size(); ++i) {
      for (std::size_t j = 0; j < labels.size(); ++j) {
        const auto& c = cells[i][j];
        if (!c.played) continue;
        cellsj.push_back({{"focal", labels[i]},
                          {"opponent", labels[j]},
                          {"mean", c.mean},
                          {"stderr", std::isfinite(c.stderr_) ? nlohmann::json(c.stderr_) : nlohmann::json(nullptr)},
                          {"n", c.n},
                          {"per_game", c.per_game}});
      }
    }
    return {{"labels", labels}, {"cells", cellsj}};
  }
};

/// Every unordered pair plays one set of games; both matrix cells come from
/// those games, so cell (i, j) and the opponent side of (j, i) agree exactly.
/// Pairs of two search entries are skipped.
template <Environment Env>
LeagueResult run_league(const Env& env, const std::vector<LeagueEntry>& entries, int n_games, std::uint64_t seed,
                        int workers = 1) {
  if (entries.size() < 2) throw ConfigError("a league needs at least two policies");
  LeagueResult res;
  const std::size_t n = entries.size();
  res.cells.assign(n, std::vector<LeagueCell>(n));
  for (const auto& e : entries) res.labels.push_back(e.label);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      if (entries[i].is_search && entries[j].is_search) continue;
      // Search entries need a model of the other side.
      std::unique_ptr<Policy> a, b;
      if (entries[i].is_search) {
        b = entries[j].make(nullptr);
        a = entries[i].make(b.get());
      } else {
        a = entries[i].make(nullptr);
        b = entries[j].make(a.get());
      }
      const auto games = play_games(env, *a, *b, n_games, derive_seed(seed, "league", i * n + j), workers);
      const ReturnSummary s = summarize(games, env.spec().discount);
      for (int side = 0; side < 2; ++side) {
        auto& c = side == 0 ? res.cells[i][j] : res.cells[j][i];
        if (side == 1 && i == j) break;
        c.played = true;
        c.mean = s.per_step_mean_return[static_cast<std::size_t>(side)];
        c.stderr_ = s.per_step_stderr[static_cast<std::size_t>(side)];
        c.n = s.episode_count;
        c.per_game = s.per_episode[static_cast<std::size_t>(side)];
      }
    }
  }
  return res;
}

/// Annotated heatmap: rows focal, columns opponent; missing cells filled
/// grey with "n/a".
inline std::string league_svg(const LeagueResult& r, const std::string& title = "mean per-step return") {
  const int n = static_cast<int>(r.labels.size());
  const int cell = 72, left = 110, top = 60;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& row : r.cells) {
    for (const auto& c : row) {
      if (c.played) {
        lo = std::min(lo, c.mean);
        hi = std::max(hi, c.mean);
      }
    }
  }
  auto colour = [&](double v) {
    const double t = hi > lo ? (v - lo) / (hi - lo) : 0.5;
    const int red = static_cast<int>(255 * (1.0 - t) + 60 * t);
    const int green = static_cast<int>(90 * (1.0 - t) + 170 * t);
    const int blue = static_cast<int>(80 * (1.0 - t) + 220 * t);
    std::ostringstream os;
    os << "rgb(" << red << "," << green << "," << blue << ")";
    return os.str();
  };
  std::ostringstream os;
  const int w = left + n * cell + 20, h = top + n * cell + 40;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<text x=\"" << left << "\" y=\"20\" font-size=\"14\">" << title << " (row vs column)</text>\n";
  for (int j = 0; j < n; ++j) {
    os << "<text x=\"" << left + j * cell + cell / 2 << "\" y=\"" << top - 8 << "\" text-anchor=\"middle\">"
       << r.labels[static_cast<std::size_t>(j)] << "</text>\n";
  }
  for (int i = 0; i < n; ++i) {
    os << "<text x=\"" << left - 8 << "\" y=\"" << top + i * cell + cell / 2 + 4 << "\" text-anchor=\"end\">"
       << r.labels[static_cast<std::size_t>(i)] << "</text>\n";
    for (int j = 0; j < n; ++j) {
      const auto& c = r.cells[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      const int x = left + j * cell, y = top + i * cell;
      os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\""
         << (c.played ? colour(c.mean) : "rgb(200,200,200)") << "\" stroke=\"white\"/>\n";
      std::ostringstream label;
      if (c.played) {
        label.precision(2);
        label << std::fixed << c.mean;
      } else {
        label << "n/a";
      }
      os << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4 << "\" text-anchor=\"middle\">"
         << label.str() << "</text>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace brs::eval
