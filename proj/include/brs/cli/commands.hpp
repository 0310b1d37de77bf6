#pragma once

// Command implementations behind the brs executable. Each returns the
// process exit code; ConfigError and NumericError propagate to main.

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "brs/cli/config.hpp"
#include "brs/cli/run.hpp"
#include "brs/coin/coin.hpp"
#include "brs/detectives/agent_model.hpp"
#include "brs/evaluation/agents.hpp"
#include "brs/evaluation/behavior.hpp"
#include "brs/evaluation/matchup.hpp"
#include "brs/evaluation/mcts.hpp"
#include "brs/evaluation/scripted.hpp"
#include "brs/training/brs.hpp"
#include "brs/training/ipd_analytic.hpp"
#include "brs/training/ipd_tsd.hpp"
#include "brs/training/naive.hpp"

namespace brs::cli {

inline json coin_agent_metadata(const RunConfig& c, long iteration) {
  return {{"iteration", iteration},
          {"variant", c.variant},
          {"config_hash", config_hash(c)},
          {"obs_dim", c.agent_spec().obs_dim},
          {"encoder_width", c.agent.encoder_width},
          {"hidden", c.agent.hidden},
          {"action_count", coin::kNumActions},
          {"grid", c.coin.grid}};
}

inline json coin_detective_metadata(const RunConfig& c, long iteration) {
  return {{"iteration", iteration},
          {"variant", c.variant},
          {"config_hash", config_hash(c)},
          {"obs_dim", c.detective_spec().obs_dim},
          {"encoder_width", c.detective.encoder_width},
          {"hidden", c.detective.hidden},
          {"trunk_width", c.detective.trunk_width},
          {"grid", c.coin.grid}};
}

inline std::string iteration_tag(long it) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06ld", it);
  return buf;
}

inline int train_coin(const RunConfig& c, std::ostream& out) {
  if (c.variant != "brs" && c.variant != "nosp" && c.variant != "norb") {
    throw ConfigError("variant: train-coin supports brs, nosp and norb");
  }
  const fs::path dir = run_directory(c);
  write_manifest(dir, c);
  const coin::CoinEnv env(c.coin);
  const GruAgentModel model{c.agent_spec()};
  const DetectiveSpec dspec = c.detective_spec();
  Rng init = make_rng(c.seed, "init");
  nn::ParameterVector agent = model.init(init);
  nn::ParameterVector detective = init_detective(dspec, init);
  BrsTrainer trainer(env, model, dspec, c.brs, c.seed, std::move(agent), std::move(detective));

  auto save = [&](const fs::path& a, const fs::path& d) {
    nn::save_checkpoint(a, make_checkpoint("coin-agent", trainer.agent(), coin_agent_metadata(c, trainer.iteration())));
    nn::save_checkpoint(
        d, make_checkpoint("coin-detective", trainer.detective(), coin_detective_metadata(c, trainer.iteration())));
  };
  save(dir / "checkpoints" / "agent-000000.ckpt", dir / "checkpoints" / "detective-000000.ckpt");

  JsonLog log(dir / "log.jsonl");
  for (int i = 0; i < c.coin_iterations; ++i) {
    const IterationLog rec = trainer.iterate();
    log.write(rec.to_json());
    const long done = trainer.iteration();
    if (done % c.checkpoint_every == 0) {
      const std::string tag = iteration_tag(done);
      save(dir / "checkpoints" / ("agent-" + tag + ".ckpt"), dir / "checkpoints" / ("detective-" + tag + ".ckpt"));
      out << "iteration " << done << ": agent vs detective " << rec.agent_vs_detective << ", self-play "
          << rec.self_play_return << " (" << rec.seconds << " s)\n"
          << std::flush;
    }
  }
  save(dir / "agent.ckpt", dir / "detective.ckpt");
  out << "wrote " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// IPD

inline std::string policy_csv(const ipd::MemoryOnePolicy& p) {
  std::ostringstream os;
  os << "state,p_cooperate\n";
  os.precision(6);
  for (int s = 0; s < ipd::kNumStates; ++s) os << ipd::kStateNames[static_cast<std::size_t>(s)] << "," << std::fixed << p.p[static_cast<std::size_t>(s)] << "\n";
  return os.str();
}

/// Reads a table written by policy_csv (or by hand in the same layout):
/// a header line, then one "state,p_cooperate" row per state in any order.
inline ipd::MemoryOnePolicy read_policy_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open policy table '" + path.string() + "'");
  std::string line;
  std::getline(is, line);
  ipd::MemoryOnePolicy p;
  std::array<bool, ipd::kNumStates> seen{};
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    const std::string name = line.substr(0, comma);
    const auto it = std::find(ipd::kStateNames.begin(), ipd::kStateNames.end(), name);
    if (comma == std::string::npos || it == ipd::kStateNames.end()) {
      throw ConfigError("policy table '" + path.string() + "': bad row '" + line + "'");
    }
    const auto s = static_cast<std::size_t>(it - ipd::kStateNames.begin());
    try {
      p.p[s] = std::stod(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw ConfigError("policy table '" + path.string() + "': bad probability in '" + line + "'");
    }
    seen[s] = true;
  }
  if (std::count(seen.begin(), seen.end(), true) != ipd::kNumStates) {
    throw ConfigError("policy table '" + path.string() + "' must list all five states");
  }
  p.validate();
  return p;
}

inline nn::Checkpoint memory_one_checkpoint(const ipd::MemoryOnePolicy& p, json meta) {
  nn::ParameterVector params;
  ad::Matrix col(ipd::kNumStates, 1);
  for (int s = 0; s < ipd::kNumStates; ++s) col(s) = p.p[static_cast<std::size_t>(s)];
  params.add("p_cooperate", col);
  return make_checkpoint("ipd-memory-one", params, std::move(meta));
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open '" + path.string() + "' for writing");
  os << text;
}

inline std::string classify(const ipd::MemoryOnePolicy& p) {
  if (is_tit_for_tat(p)) return "TFT";
  if (is_cynic_tit_for_tat(p)) return "CTFT";
  return "other";
}

inline int train_ipd(const RunConfig& c, std::ostream& out) {
  const fs::path dir = run_directory(c);
  write_manifest(dir, c);
  std::ostringstream summary;
  summary << "seed,START,CC,CD,DC,DD,class\n";
  std::map<std::string, int> classes;
  for (int k = 0; k < c.num_seeds; ++k) {
    const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(k);
    const fs::path sdir = dir / ("seed-" + std::to_string(seed));
    JsonLog log(sdir / "log.jsonl");
    ipd::MemoryOnePolicy table;
    if (c.variant == "analytic") {
      AnalyticTrainer tr(c.analytic);
      for (int i = 0; i < c.analytic.iterations; ++i) {
        const auto rec = tr.iterate();
        log.write(rec.to_json());
      }
      table = tr.policy();
      nn::save_checkpoint(sdir / "policy.ckpt",
                          memory_one_checkpoint(table, {{"iteration", tr.iteration()},
                                                        {"variant", c.variant},
                                                        {"discount", c.analytic.discount}}));
      const auto br = exact_best_response(table, c.analytic);
      const auto self = ipd::exact_memory_one_value(table, table, c.analytic.discount);
      write_json(sdir / "values.json", {{"agent_vs_best_response", br.values.v1},
                                        {"best_response_value", br.values.v2},
                                        {"best_response", br.policy.p},
                                        {"best_response_converged", br.converged},
                                        {"self_play_value", self.v1},
                                        {"mutual_cooperation_value", -1.0 / (1.0 - c.analytic.discount)}});
    } else if (c.variant == "naive") {
      NaiveDuelTrainer tr(c.ipd, c.ipd_train, seed);
      for (int i = 0; i < c.ipd_train.iterations; ++i) log.write(tr.iterate().to_json());
      for (int p = 0; p < 2; ++p) {
        nn::save_checkpoint(sdir / ("policy" + std::to_string(p) + ".ckpt"),
                            make_checkpoint("ipd-mlp", tr.params(p),
                                            {{"hidden", c.ipd_train.hidden}, {"variant", c.variant}, {"player", p}}));
        write_text(sdir / ("policy" + std::to_string(p) + ".csv"), policy_csv(tr.table(p)));
      }
      table = tr.table(0);
    } else if (c.variant == "brs" || c.variant == "nosp") {
      IpdTrainConfig tc = c.ipd_train;
      if (c.variant == "nosp") tc.self_play = false;
      IpdTsdTrainer tr(c.ipd, tc, seed);
      for (int i = 0; i < tc.iterations; ++i) {
        const auto rec = tr.iterate();
        if (i % 10 == 0 || i + 1 == tc.iterations) log.write(rec.to_json());
      }
      table = tr.table();
      nn::save_checkpoint(sdir / "policy.ckpt",
                          make_checkpoint("ipd-mlp", tr.params(),
                                          {{"hidden", tc.hidden}, {"variant", c.variant}, {"iteration", tr.iteration()}}));
    } else {
      throw ConfigError("variant: train-ipd supports brs, nosp, naive and analytic");
    }
    write_text(sdir / "policy.csv", policy_csv(table));
    const std::string cls = classify(table);
    ++classes[cls];
    summary << seed;
    for (double p : table.p) summary << "," << p;
    summary << "," << cls << "\n";
    out << "seed " << seed << ": " << cls << " [";
    for (int s = 0; s < 5; ++s) out << (s ? " " : "") << table.p[static_cast<std::size_t>(s)];
    out << "]\n";
  }
  write_text(dir / "summary.csv", summary.str());
  for (const auto& [k, v] : classes) out << k << ": " << v << "/" << c.num_seeds << " seeds\n";
  out << "wrote " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// Coin Game evaluation

inline const std::vector<std::string>& scripted_names() {
  static const std::vector<std::string> v{"AC", "AD", "random", "grim", "MCTS"};
  return v;
}

/// Builds a league entry from a scripted name or a coin-agent checkpoint.
inline eval::LeagueEntry resolve_entry(const std::string& name, const RunConfig& c, std::uint64_t seed) {
  const coin::CoinConfig cc = c.coin;
  if (name == "AC") return {name, false, [cc](const Policy*) { return std::make_unique<eval::AlwaysCooperate>(cc); }};
  if (name == "AD") return {name, false, [cc](const Policy*) { return std::make_unique<eval::AlwaysDefect>(cc); }};
  if (name == "random") return {name, false, [cc](const Policy*) { return std::make_unique<eval::UniformRandom>(cc); }};
  if (name == "grim") return {name, false, [cc](const Policy*) { return std::make_unique<eval::GrimRetaliator>(cc); }};
  if (name == "MCTS") {
    const MctsConfig mc = c.mcts;
    return {name, true, [cc, mc, seed](const Policy* other) -> std::unique_ptr<Policy> {
              if (!other) throw ConfigError("MCTS needs an opponent");
              return std::make_unique<eval::MctsPolicy>(cc, other->clone(), mc, seed);
            }};
  }
  fs::path path(name);
  if (!fs::exists(path)) {
    std::string msg = "cannot resolve policy '" + name + "'; candidates: AC, AD, random, grim, MCTS";
    const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    if (fs::is_directory(dir)) {
      for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".ckpt") msg += ", " + e.path().string();
      }
    }
    throw ConfigError(msg);
  }
  const nn::Checkpoint ck = nn::load_checkpoint(path);
  if (ck.kind != "coin-agent") throw ConfigError("'" + name + "' holds a " + ck.kind + " checkpoint, not a coin agent");
  const nn::GruAgentSpec spec = eval::gru_spec_from_metadata(ck.metadata);
  if (spec.obs_dim != 4 * cc.grid * cc.grid) throw ConfigError("'" + name + "' was trained on a different grid");
  auto params = std::make_shared<const nn::ParameterVector>(ck.params);
  const std::string label = path.stem().string();
  return {label, false, [spec, params, label](const Policy*) { return std::make_unique<eval::GruPolicy>(spec, params, label); }};
}

inline void require_coin_agent(const RunConfig& c) {
  if (c.checkpoint.empty()) throw ConfigError("checkpoint: a coin agent checkpoint is required");
}

/// Games of `agent` against the named opponent; "pool" means AC, AD and a
/// copy of the agent, `games` each.
inline std::vector<Trajectory> games_against(const RunConfig& c, const eval::LeagueEntry& agent,
                                             const std::string& opponent) {
  const coin::CoinEnv env(c.coin);
  std::vector<Trajectory> all;
  const std::vector<std::string> opps =
      opponent == "pool" ? std::vector<std::string>{"AC", "AD", "self"} : std::vector<std::string>{opponent};
  for (std::size_t k = 0; k < opps.size(); ++k) {
    auto a = agent.make(nullptr);
    std::unique_ptr<Policy> b;
    if (opps[k] == "self") {
      b = agent.make(nullptr);
    } else {
      b = resolve_entry(opps[k], c, c.seed).make(a.get());
    }
    auto g = eval::play_games(env, *a, *b, c.games, derive_seed(c.seed, "games-" + opps[k]), c.workers);
    all.insert(all.end(), g.begin(), g.end());
  }
  return all;
}

inline int eval_command(const RunConfig& c, std::ostream& out) {
  require_coin_agent(c);
  const nn::Checkpoint ck = nn::load_checkpoint(c.checkpoint);
  if (ck.kind == "ipd-mlp" || ck.kind == "ipd-memory-one") {
    const auto table = eval::ipd_table_from_checkpoint(ck);
    std::map<std::string, ipd::MemoryOnePolicy> opps{{"AC", ipd::MemoryOnePolicy::always_cooperate()},
                                                     {"AD", ipd::MemoryOnePolicy::always_defect()},
                                                     {"TFT", ipd::MemoryOnePolicy::tit_for_tat()},
                                                     {"self", table}};
    if (!opps.contains(c.opponent)) throw ConfigError("opponent: IPD opponents are AC, AD, TFT and self");
    const auto s = ipd::finite_ipd_game(table, opps.at(c.opponent), c.ipd.length, c.ipd.discount, c.games, c.seed);
    const json j = {{"opponent", c.opponent}, {"games", c.games},
                    {"agent_return", s.discounted_return[0]}, {"opponent_return", s.discounted_return[1]}};
    out << j.dump(2) << "\n";
    return 0;
  }
  const auto agent = resolve_entry(c.checkpoint, c, c.seed);
  const auto games = games_against(c, agent, c.opponent);
  const ReturnSummary s = summarize(games, c.coin.discount);
  auto num = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
  const json j = {{"agent", agent.label},
                  {"opponent", c.opponent},
                  {"games", s.episode_count},
                  {"agent_per_step", s.per_step_mean_return[0]},
                  {"agent_stderr", num(s.per_step_stderr[0])},
                  {"opponent_per_step", s.per_step_mean_return[1]},
                  {"opponent_stderr", num(s.per_step_stderr[1])}};
  out << j.dump(2) << "\n";
  if (!c.output.empty()) write_json(run_directory(c) / "eval.json", j);
  return 0;
}

inline int stats_command(const RunConfig& c, std::ostream& out) {
  require_coin_agent(c);
  const auto agent = resolve_entry(c.checkpoint, c, c.seed);
  const auto games = games_against(c, agent, c.opponent);
  const eval::BehaviorStats st = eval::behavior_stats(games, 0, eval::TurnMode::Pickup);
  const std::string csv = eval::behavior_csv({{agent.label, st}});
  out << csv;
  const fs::path dir = run_directory(c);
  write_json(dir / "stats.json", {{"agent", agent.label}, {"opponent", c.opponent}, {"stats", st.to_json()}});
  write_text(dir / "stats.csv", csv);
  return 0;
}

inline int league_command(const RunConfig& c, std::ostream& out) {
  if (std::count(c.policies.begin(), c.policies.end(), "MCTS") > 1) {
    throw ConfigError("policies: MCTS may appear at most once (no MCTS-vs-MCTS games)");
  }
  std::vector<eval::LeagueEntry> entries;
  for (const auto& p : c.policies) entries.push_back(resolve_entry(p, c, c.seed));
  const coin::CoinEnv env(c.coin);
  const eval::LeagueResult r = eval::run_league(env, entries, c.games, c.seed, c.workers);
  const fs::path dir = run_directory(c);
  write_manifest(dir, c);
  write_text(dir / "league.csv", r.to_csv());
  write_json(dir / "league.json", r.to_json());
  write_text(dir / "league.svg", eval::league_svg(r));
  out << r.to_csv() << "wrote " << dir.string() << "\n";
  return 0;
}

inline int export_policy_command(const RunConfig& c, std::ostream& out) {
  if (c.checkpoint.empty()) throw ConfigError("checkpoint: export-policy needs --checkpoint");
  const fs::path dir = run_directory(c);
  // An externally produced IPD table comes in as CSV and leaves as a checkpoint.
  if (fs::path(c.checkpoint).extension() == ".csv") {
    const auto table = read_policy_csv(c.checkpoint);
    nn::save_checkpoint(dir / "policy.ckpt", memory_one_checkpoint(table, {{"imported_from", c.checkpoint}}));
    const std::string csv = policy_csv(table);
    write_text(dir / "policy.csv", csv);
    out << csv;
    return 0;
  }
  const nn::Checkpoint ck = nn::load_checkpoint(c.checkpoint);
  if (ck.kind == "ipd-mlp" || ck.kind == "ipd-memory-one") {
    const std::string csv = policy_csv(eval::ipd_table_from_checkpoint(ck));
    write_text(dir / "policy.csv", csv);
    out << csv;
    return 0;
  }
  json arrays = json::array();
  for (const auto& e : ck.params.entries()) {
    arrays.push_back({{"name", e.name}, {"rows", e.value.rows()}, {"cols", e.value.cols()}, {"norm", e.value.norm()}});
  }
  const json m = {{"kind", ck.kind}, {"metadata", ck.metadata}, {"total_parameters", ck.params.total_dim()},
                  {"arrays", arrays}};
  write_json(dir / "policy_manifest.json", m);
  out << m.dump(2) << "\n";
  return 0;
}

inline int run_command(const RunConfig& c, std::ostream& out) {
  if (c.command == "train-coin") return train_coin(c, out);
  if (c.command == "train-ipd") return train_ipd(c, out);
  if (c.command == "eval") return eval_command(c, out);
  if (c.command == "stats") return stats_command(c, out);
  if (c.command == "league") return league_command(c, out);
  if (c.command == "export-policy") return export_policy_command(c, out);
  throw ConfigError("command: unknown command '" + c.command + "'");
}

}  // namespace brs::cli
