// Command-line entry point. Settings resolve in three layers: built-in
// defaults, then --config, then flags. Exit codes: 0 ok, 2 configuration
// error, 3 numeric failure.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "brs/cli/commands.hpp"

namespace {

using nlohmann::json;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> num_seeds, workers, iterations, checkpoint_every, batch_size, games;
  std::optional<std::string> output, variant, checkpoint, opponent;
  bool no_self_play = false;
  bool print_config = false;
  std::vector<std::string> policies;
  std::vector<std::string> sets;
};

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
  app->add_option("--seed", f.seed, "root seed");
  app->add_option("--workers", f.workers, "worker threads");
  app->add_option("--output", f.output, "run directory (relative paths go under $BRS_OUTPUT_ROOT)");
  app->add_option("--set", f.sets, "override any config field: dotted.path=value (value parsed as JSON)");
  app->add_flag("--print-config", f.print_config, "print the resolved config and exit");
}

void add_training(CLI::App* app, Flags& f) {
  app->add_option("--variant", f.variant, "brs | nosp | norb | naive | analytic");
  app->add_flag("--no-self-play", f.no_self_play, "shorthand for --variant nosp");
  app->add_option("--iterations", f.iterations, "training iterations");
  app->add_option("--checkpoint-every", f.checkpoint_every, "iterations between checkpoints");
  app->add_option("--batch-size", f.batch_size, "episodes per update");
  app->add_option("--num-seeds", f.num_seeds, "consecutive seeds to train");
}

void set_path(json& j, const std::string& dotted, json value) {
  std::string ptr = "/" + dotted;
  for (auto& ch : ptr) {
    if (ch == '.') ch = '/';
  }
  j[json::json_pointer(ptr)] = std::move(value);
}

json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return text;  // bare strings need no quotes
  }
}

brs::cli::RunConfig resolve(const std::string& command, const Flags& f) {
  json j = json::object();
  if (!f.config.empty()) {
    std::ifstream is(f.config);
    try {
      j = json::parse(is, nullptr, true, true);
    } catch (const json::exception& e) {
      throw brs::ConfigError("config '" + f.config + "' is not valid JSON: " + e.what());
    }
  }
  j["command"] = command;
  const bool ipd = command == "train-ipd";
  if (f.seed) j["seed"] = *f.seed;
  if (f.num_seeds) j["num_seeds"] = *f.num_seeds;
  if (f.workers) j["workers"] = *f.workers;
  if (f.output) j["output"] = *f.output;
  if (f.variant) j["variant"] = *f.variant;
  if (f.no_self_play) j["variant"] = "nosp";
  if (f.checkpoint_every) j["checkpoint_every"] = *f.checkpoint_every;
  if (f.iterations) {
    const std::string v = j.value("variant", "brs");
    set_path(j, ipd ? (v == "analytic" ? "analytic.iterations" : "ipd_train.iterations") : "coin_iterations",
             *f.iterations);
  }
  if (f.batch_size) set_path(j, ipd ? "ipd_train.batch_size" : "brs.batch_size", *f.batch_size);
  if (f.games) j["games"] = *f.games;
  if (f.checkpoint) j["checkpoint"] = *f.checkpoint;
  if (f.opponent) j["opponent"] = *f.opponent;
  if (!f.policies.empty()) j["policies"] = f.policies;
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw brs::ConfigError("--set expects path=value, got '" + s + "'");
    set_path(j, s.substr(0, eq), parse_value(s.substr(eq + 1)));
  }
  return brs::cli::from_json(j);
}

}  // namespace

int main(int argc, char** argv) {
  brs::tune_allocator();
  CLI::App app{"Best-response shaping: training, evaluation and leagues"};
  app.set_version_flag("--version", brs::kVersion);
  app.require_subcommand(1);
  Flags f;

  auto* train_ipd = app.add_subcommand("train-ipd", "train IPD agents against the tree-search detective");
  add_common(train_ipd, f);
  add_training(train_ipd, f);
  auto* train_coin = app.add_subcommand("train-coin", "train a Coin Game agent against a learned detective");
  add_common(train_coin, f);
  add_training(train_coin, f);
  auto* eval = app.add_subcommand("eval", "play a checkpoint against one opponent");
  add_common(eval, f);
  eval->add_option("--checkpoint", f.checkpoint, "agent checkpoint");
  eval->add_option("--opponent", f.opponent, "AC | AD | MCTS | random | checkpoint path");
  eval->add_option("--games", f.games, "independent games");
  auto* league = app.add_subcommand("league", "all-pairs matchup matrix");
  add_common(league, f);
  league->add_option("policies", f.policies, "checkpoint paths or AC / AD / MCTS");
  league->add_option("--games", f.games, "games per cell");
  auto* stats = app.add_subcommand("stats", "conditional cooperation statistics for a checkpoint");
  add_common(stats, f);
  stats->add_option("--checkpoint", f.checkpoint, "agent checkpoint");
  stats->add_option("--opponent", f.opponent, "opponent the statistics are collected against");
  stats->add_option("--games", f.games, "independent games");
  auto* export_policy = app.add_subcommand("export-policy", "policy table (IPD) or manifest (Coin Game)");
  add_common(export_policy, f);
  export_policy->add_option("--checkpoint", f.checkpoint, "checkpoint to export");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const std::string command = app.get_subcommands().front()->get_name();
    const brs::cli::RunConfig cfg = resolve(command, f);
    if (f.print_config) {
      std::cout << brs::cli::to_json(cfg).dump(2) << "\n";
      return 0;
    }
    return brs::cli::run_command(cfg, std::cout);
  } catch (const brs::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const brs::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  }
}
