#pragma once

// Run configuration: one JSON document covering every command. Unknown keys
// are rejected with their full path so typos never silently fall back to a
// default.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "brs/coin/coin.hpp"
#include "brs/common.hpp"
#include "brs/evaluation/mcts_config.hpp"
#include "brs/ipd/ipd.hpp"
#include "brs/training/brs.hpp"
#include "brs/training/ipd_config.hpp"

namespace brs::cli {

using nlohmann::json;

struct AgentWidths {
  int encoder_width = 64;
  int hidden = 64;
};

struct DetectiveWidths {
  int encoder_width = 64;
  int hidden = 64;
  int trunk_width = 64;
};

struct RunConfig {
  std::string command = "train-coin";
  std::uint64_t seed = 0;
  int num_seeds = 1;
  int workers = 1;
  std::string output;  // run directory; relative paths resolve under the output root
  int checkpoint_every = 100;
  std::string variant = "brs";  // brs | nosp | norb | naive | analytic

  ipd::IpdConfig ipd{};
  IpdTrainConfig ipd_train{};
  AnalyticConfig analytic{};

  coin::CoinConfig coin{};
  int coin_iterations = 3000;
  AgentWidths agent{};
  DetectiveWidths detective{};
  BrsConfig brs{};

  MctsConfig mcts{};
  int games = 32;
  std::vector<std::string> policies;  // league entries: checkpoint paths or AC / AD / MCTS
  std::string checkpoint;             // input for eval, stats and export-policy
  std::string opponent = "AD";        // eval and stats opponent

  nn::GruAgentSpec agent_spec() const {
    return {4 * coin.grid * coin.grid, agent.encoder_width, agent.hidden, coin::kNumActions};
  }
  DetectiveSpec detective_spec() const {
    return {4 * coin.grid * coin.grid, detective.encoder_width, detective.hidden, coin::kNumActions, coin::kNumActions,
            detective.trunk_width};
  }

  void validate() const {
    static const std::set<std::string> commands{"train-ipd", "train-coin", "eval", "league", "stats", "export-policy"};
    if (!commands.contains(command)) throw ConfigError("command: unknown command '" + command + "'");
    static const std::set<std::string> variants{"brs", "nosp", "norb", "naive", "analytic"};
    if (!variants.contains(variant)) throw ConfigError("variant: unknown variant '" + variant + "'");
    if (num_seeds < 1) throw ConfigError("num_seeds: must be >= 1");
    if (workers < 1) throw ConfigError("workers: must be >= 1");
    if (checkpoint_every < 1) throw ConfigError("checkpoint_every: must be >= 1");
    if (coin_iterations < 0) throw ConfigError("coin_iterations: must be >= 0");
    if (games < 1) throw ConfigError("games: must be >= 1");
    if (agent.encoder_width < 1 || agent.hidden < 1) throw ConfigError("agent: widths must be >= 1");
    if (detective.encoder_width < 1 || detective.hidden < 1 || detective.trunk_width < 1) {
      throw ConfigError("detective: widths must be >= 1");
    }
    GameSpec{2, 2, ipd.length, ipd.discount, ipd::kNumStates}.validate();
    ipd_train.validate();
    analytic.validate();
    coin.validate();
    brs.validate();
    mcts.validate();
  }
};

namespace detail {

/// Reads named fields of one JSON object and reports leftovers.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(where("") + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }

  const json* object(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string where(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.contains(k)) throw ConfigError(where(k) + ": unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline json optimizer_json(const nn::OptimizerConfig& o) {
  return {{"algorithm", nn::to_string(o.algorithm)}, {"lr", o.lr}, {"beta1", o.beta1}, {"beta2", o.beta2},
          {"eps", o.eps}};
}

inline void read_optimizer(const json& j, const std::string& path, nn::OptimizerConfig& o) {
  Fields f(j, path);
  std::string algo = nn::to_string(o.algorithm);
  f.get("algorithm", algo);
  try {
    o.algorithm = nn::parse_algorithm(algo);
  } catch (const ConfigError& e) {
    throw ConfigError(f.where("algorithm") + ": " + e.what());
  }
  f.get("lr", o.lr);
  f.get("beta1", o.beta1);
  f.get("beta2", o.beta2);
  f.get("eps", o.eps);
  f.finish();
}

inline BrsConfig brs_defaults(const std::string& variant) {
  BrsConfig c = variant == "nosp" ? BrsConfig::no_self_play() : BrsConfig{};
  if (variant == "norb") {
    c.replay_buffer = false;
    c.sigma = 0.0;
  }
  return c;
}

}  // namespace detail

inline json to_json(const RunConfig& c) {
  const auto& b = c.brs;
  return {
      {"command", c.command},
      {"seed", c.seed},
      {"num_seeds", c.num_seeds},
      {"workers", c.workers},
      {"output", c.output},
      {"checkpoint_every", c.checkpoint_every},
      {"variant", c.variant},
      {"ipd", {{"length", c.ipd.length}, {"discount", c.ipd.discount}}},
      {"ipd_train",
       {{"iterations", c.ipd_train.iterations},
        {"batch_size", c.ipd_train.batch_size},
        {"hidden", c.ipd_train.hidden},
        {"lr", c.ipd_train.lr},
        {"self_play_lr", c.ipd_train.self_play_lr},
        {"baseline_decay", c.ipd_train.baseline_decay},
        {"self_play", c.ipd_train.self_play}}},
      {"analytic",
       {{"iterations", c.analytic.iterations},
        {"discount", c.analytic.discount},
        {"lr", c.analytic.lr},
        {"inner_lr", c.analytic.inner_lr},
        {"inner_tolerance", c.analytic.inner_tolerance},
        {"inner_max_iterations", c.analytic.inner_max_iterations}}},
      {"coin",
       {{"grid", c.coin.grid},
        {"length", c.coin.length},
        {"discount", c.coin.discount},
        {"alternate_colors", c.coin.alternate_colors}}},
      {"coin_iterations", c.coin_iterations},
      {"agent", {{"encoder_width", c.agent.encoder_width}, {"hidden", c.agent.hidden}}},
      {"detective",
       {{"encoder_width", c.detective.encoder_width},
        {"hidden", c.detective.hidden},
        {"trunk_width", c.detective.trunk_width}}},
      {"brs",
       {{"batch_size", b.batch_size},
        {"sigma", b.sigma},
        {"buffer_capacity", b.buffer_capacity},
        {"replay_buffer", b.replay_buffer},
        {"self_play", b.self_play},
        {"gae_lambda", b.gae_lambda},
        {"agent_entropy", b.agent_entropy},
        {"detective_entropy", b.detective_entropy},
        {"agent_term1", detail::optimizer_json(b.agent_term1)},
        {"agent_term2", detail::optimizer_json(b.agent_term2)},
        {"agent_value", detail::optimizer_json(b.agent_value)},
        {"self_play_opt", detail::optimizer_json(b.self_play_opt)},
        {"detective", detail::optimizer_json(b.detective)}}},
      {"qa",
       {{"num_samples", b.qa.num_samples},
        {"inner_length", b.qa.inner_length},
        {"discount", b.qa.discount},
        {"normalize", b.qa.normalize},
        {"mode", b.qa.mode == QaMode::Sample ? "sample" : "enumerate"}}},
      {"mcts",
       {{"simulations", c.mcts.simulations},
        {"max_depth", c.mcts.max_depth},
        {"exploration", c.mcts.exploration},
        {"rollout", to_string(c.mcts.rollout)}}},
      {"games", c.games},
      {"policies", c.policies},
      {"checkpoint", c.checkpoint},
      {"opponent", c.opponent},
  };
}

/// Parses a full or partial document; absent keys keep their defaults. The
/// variant is read first because it selects the BRS defaults.
inline RunConfig from_json(const json& j) {
  RunConfig c;
  detail::Fields f(j, "");
  f.get("variant", c.variant);
  c.brs = detail::brs_defaults(c.variant);
  if (c.variant == "nosp") c.ipd_train.self_play = false;
  f.get("command", c.command);
  f.get("seed", c.seed);
  f.get("num_seeds", c.num_seeds);
  f.get("workers", c.workers);
  f.get("output", c.output);
  f.get("checkpoint_every", c.checkpoint_every);
  if (const json* s = f.object("ipd")) {
    detail::Fields g(*s, "ipd");
    g.get("length", c.ipd.length);
    g.get("discount", c.ipd.discount);
    g.finish();
  }
  if (const json* s = f.object("ipd_train")) {
    detail::Fields g(*s, "ipd_train");
    g.get("iterations", c.ipd_train.iterations);
    g.get("batch_size", c.ipd_train.batch_size);
    g.get("hidden", c.ipd_train.hidden);
    g.get("lr", c.ipd_train.lr);
    g.get("self_play_lr", c.ipd_train.self_play_lr);
    g.get("baseline_decay", c.ipd_train.baseline_decay);
    g.get("self_play", c.ipd_train.self_play);
    g.finish();
  }
  if (const json* s = f.object("analytic")) {
    detail::Fields g(*s, "analytic");
    g.get("iterations", c.analytic.iterations);
    g.get("discount", c.analytic.discount);
    g.get("lr", c.analytic.lr);
    g.get("inner_lr", c.analytic.inner_lr);
    g.get("inner_tolerance", c.analytic.inner_tolerance);
    g.get("inner_max_iterations", c.analytic.inner_max_iterations);
    g.finish();
  }
  if (const json* s = f.object("coin")) {
    detail::Fields g(*s, "coin");
    g.get("grid", c.coin.grid);
    g.get("length", c.coin.length);
    g.get("discount", c.coin.discount);
    g.get("alternate_colors", c.coin.alternate_colors);
    g.finish();
  }
  f.get("coin_iterations", c.coin_iterations);
  if (const json* s = f.object("agent")) {
    detail::Fields g(*s, "agent");
    g.get("encoder_width", c.agent.encoder_width);
    g.get("hidden", c.agent.hidden);
    g.finish();
  }
  if (const json* s = f.object("detective")) {
    detail::Fields g(*s, "detective");
    g.get("encoder_width", c.detective.encoder_width);
    g.get("hidden", c.detective.hidden);
    g.get("trunk_width", c.detective.trunk_width);
    g.finish();
  }
  if (const json* s = f.object("brs")) {
    detail::Fields g(*s, "brs");
    auto& b = c.brs;
    g.get("batch_size", b.batch_size);
    g.get("sigma", b.sigma);
    g.get("buffer_capacity", b.buffer_capacity);
    g.get("replay_buffer", b.replay_buffer);
    g.get("self_play", b.self_play);
    g.get("gae_lambda", b.gae_lambda);
    g.get("agent_entropy", b.agent_entropy);
    g.get("detective_entropy", b.detective_entropy);
    for (auto [key, opt] : {std::pair{"agent_term1", &b.agent_term1}, std::pair{"agent_term2", &b.agent_term2},
                            std::pair{"agent_value", &b.agent_value}, std::pair{"self_play_opt", &b.self_play_opt},
                            std::pair{"detective", &b.detective}}) {
      if (const json* o = g.object(key)) detail::read_optimizer(*o, g.where(key), *opt);
    }
    g.finish();
  }
  if (const json* s = f.object("qa")) {
    detail::Fields g(*s, "qa");
    auto& q = c.brs.qa;
    g.get("num_samples", q.num_samples);
    g.get("inner_length", q.inner_length);
    g.get("discount", q.discount);
    g.get("normalize", q.normalize);
    std::string mode = q.mode == QaMode::Sample ? "sample" : "enumerate";
    g.get("mode", mode);
    if (mode != "sample" && mode != "enumerate") throw ConfigError("qa.mode: expected sample or enumerate");
    q.mode = mode == "sample" ? QaMode::Sample : QaMode::Enumerate;
    g.finish();
  }
  if (const json* s = f.object("mcts")) {
    detail::Fields g(*s, "mcts");
    g.get("simulations", c.mcts.simulations);
    g.get("max_depth", c.mcts.max_depth);
    g.get("exploration", c.mcts.exploration);
    std::string rollout = to_string(c.mcts.rollout);
    g.get("rollout", rollout);
    try {
      c.mcts.rollout = parse_rollout_policy(rollout);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("mcts.rollout: ") + e.what());
    }
    g.finish();
  }
  f.get("games", c.games);
  f.get("policies", c.policies);
  f.get("checkpoint", c.checkpoint);
  f.get("opponent", c.opponent);
  f.finish();
  c.validate();
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(is, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return from_json(j);
}

/// Hex digest of the canonical serialization.
inline std::string config_hash(const RunConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_json(c).dump())));
  return buf;
}

/// Fields whose defaults are published values; every other field is a
/// design decision of this implementation.
inline const std::set<std::string>& published_defaults() {
  static const std::set<std::string> s{
      "brs.batch_size",      "brs.sigma",      "brs.buffer_capacity", "brs.gae_lambda", "brs.agent_term1.algorithm",
      "brs.agent_term1.lr",  "brs.agent_value.lr", "brs.detective.lr", "coin.grid",     "coin.length",
      "coin.discount",       "qa.num_samples", "qa.inner_length",     "ipd.length",     "ipd.discount",
      "ipd_train.lr",        "ipd_train.self_play_lr", "games",
  };
  return s;
}

/// Flattened "path": "paper" | "decision" map over every leaf field.
inline json provenance(const RunConfig& c) {
  json out = json::object();
  const json flat = to_json(c).flatten();
  for (const auto& [ptr, v] : flat.items()) {
    std::string path = ptr.substr(1);
    for (auto& ch : path) {
      if (ch == '/') ch = '.';
    }
    out[path] = published_defaults().contains(path) ? "paper" : "decision";
  }
  return out;
}

}  // namespace brs::cli
