#pragma once

// JSON-lines trajectory export: one episode per line.

#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "brs/core/game.hpp"

namespace brs {

inline std::string to_string(Event e) {
  switch (e) {
    case Event::PickedOwn:
      return "own";
    case Event::PickedOther:
      return "other";
    case Event::None:
      break;
  }
  return "none";
}

inline Event parse_event(const std::string& s) {
  if (s == "none") return Event::None;
  if (s == "own") return Event::PickedOwn;
  if (s == "other") return Event::PickedOther;
  throw ConfigError("unknown event '" + s + "'");
}

inline nlohmann::json to_json(const Trajectory& tr, bool with_observations = false) {
  nlohmann::json j;
  j["seed"] = tr.seed;
  j["length"] = tr.length();
  j["actions"] = tr.actions;
  j["rewards"] = tr.rewards;
  j["log_probs"] = tr.log_probs;
  nlohmann::json ev = nlohmann::json::array();
  for (const auto& e : tr.events) ev.push_back({to_string(e[0]), to_string(e[1])});
  j["events"] = std::move(ev);
  if (with_observations) j["observations"] = tr.observations;
  return j;
}

inline Trajectory trajectory_from_json(const nlohmann::json& j) {
  Trajectory tr;
  try {
    tr.seed = j.at("seed").get<std::uint64_t>();
    tr.actions = j.at("actions").get<std::vector<std::array<int, 2>>>();
    tr.rewards = j.at("rewards").get<std::vector<std::array<double, 2>>>();
    tr.log_probs = j.at("log_probs").get<std::vector<std::array<double, 2>>>();
    for (const auto& e : j.at("events")) {
      tr.events.push_back({parse_event(e.at(0).get<std::string>()), parse_event(e.at(1).get<std::string>())});
    }
    if (j.contains("observations")) {
      tr.observations = j["observations"].get<std::vector<std::array<std::vector<double>, 2>>>();
    } else {
      tr.observations.resize(tr.actions.size());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed trajectory record: ") + e.what());
  }
  tr.validate();
  return tr;
}

inline void write_jsonl(std::ostream& os, std::span<const Trajectory> episodes, bool with_observations = false) {
  for (const auto& tr : episodes) os << to_json(tr, with_observations).dump() << '\n';
}

inline std::vector<Trajectory> read_jsonl(std::istream& is) {
  std::vector<Trajectory> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(trajectory_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace brs
