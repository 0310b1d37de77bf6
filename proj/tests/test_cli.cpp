#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "brs/cli/commands.hpp"

using namespace brs;
using namespace brs::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("brs-cli-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Runs the built executable; returns its exit code.
int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(BRS_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

// --- configuration ---------------------------------------------------------

TEST(Config, RoundTripsThroughJson) {
  RunConfig c;
  c.seed = 42;
  c.variant = "norb";
  c.brs = brs::cli::detail::brs_defaults("norb");
  c.coin.grid = 4;
  c.brs.qa.mode = QaMode::Enumerate;
  c.mcts.rollout = RolloutPolicy::Uniform;
  c.policies = {"AC", "AD"};
  const RunConfig back = from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
  RunConfig d = c;
  d.seed = 43;
  EXPECT_NE(config_hash(d), config_hash(c));
}

TEST(Config, DefaultsMatchThePublishedSettings) {
  const RunConfig c;
  EXPECT_EQ(c.brs.batch_size, 128);
  EXPECT_EQ(c.brs.buffer_capacity, 512u);
  EXPECT_EQ(BrsConfig::no_self_play().buffer_capacity, 2048u);
  EXPECT_EQ(c.brs.agent_term1.lr, 3e-4);
  EXPECT_EQ(c.brs.agent_term1.algorithm, nn::Algorithm::Adam);
  EXPECT_EQ(c.brs.detective.lr, 3e-4);
  EXPECT_EQ(c.ipd_train.lr, 3e-4);
  EXPECT_EQ(c.ipd_train.self_play_lr, 3e-4);
  EXPECT_EQ(c.coin.discount, 0.96);
  EXPECT_EQ(c.coin.length, 50);
  EXPECT_EQ(c.coin.grid, 3);
  EXPECT_EQ(c.brs.qa.num_samples, 16);
  EXPECT_EQ(c.brs.qa.inner_length, 4);
  EXPECT_EQ(c.brs.gae_lambda, 1.0);
  EXPECT_EQ(c.brs.sigma, 0.1);
  const RunConfig nosp = from_json({{"variant", "nosp"}});
  EXPECT_EQ(nosp.brs.buffer_capacity, 2048u);
  EXPECT_FALSE(nosp.brs.self_play);
  EXPECT_FALSE(nosp.ipd_train.self_play);
}

TEST(Config, ProvenanceMarksEveryLeaf) {
  const json prov = provenance(RunConfig{});
  const json flat = to_json(RunConfig{}).flatten();
  EXPECT_EQ(prov.size(), flat.size());
  EXPECT_EQ(prov["brs.batch_size"], "paper");
  EXPECT_EQ(prov["qa.num_samples"], "paper");
  EXPECT_EQ(prov["mcts.simulations"], "decision");
  EXPECT_EQ(prov["agent.hidden"], "decision");
  for (const auto& [k, v] : prov.items()) EXPECT_TRUE(v == "paper" || v == "decision") << k;
}

TEST(Config, ErrorsNameTheField) {
  try {
    from_json({{"brs", {{"batch_sise", 3}}}});
    FAIL() << "unknown key accepted";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("brs.batch_sise"), std::string::npos) << e.what();
  }
  EXPECT_THROW(from_json({{"brs", {{"batch_size", 0}}}}), ConfigError);
  EXPECT_THROW(from_json({{"variant", "pola"}}), ConfigError);
  EXPECT_THROW(from_json({{"coin", {{"grid", "three"}}}}), ConfigError);
}

// --- commands in process ---------------------------------------------------

TEST(Commands, ZeroIterationsWritesOnlyTheInitialCheckpoint) {
  const fs::path dir = scratch("zero");
  RunConfig c;
  c.command = "train-coin";
  c.coin_iterations = 0;
  c.agent = {8, 8};
  c.detective = {8, 8, 8};
  c.output = (dir / "run").string();
  std::ostringstream out;
  EXPECT_EQ(run_command(c, out), 0);
  const auto init = nn::load_checkpoint(dir / "run" / "checkpoints" / "agent-000000.ckpt");
  const auto final_ = nn::load_checkpoint(dir / "run" / "agent.ckpt");
  EXPECT_EQ(init.params, final_.params);
  EXPECT_EQ(final_.metadata["iteration"], 0);
  EXPECT_TRUE(slurp(dir / "run" / "log.jsonl").empty());
  const json manifest = json::parse(slurp(dir / "run" / "manifest.json"));
  EXPECT_EQ(manifest["config_hash"], config_hash(c));
  EXPECT_EQ(manifest["seed"], 0);
  EXPECT_TRUE(manifest.contains("version"));
}

TEST(Commands, ExportOfHandWrittenTitForTat) {
  const fs::path dir = scratch("tft");
  nn::save_checkpoint(dir / "tft.ckpt", memory_one_checkpoint(ipd::MemoryOnePolicy::tit_for_tat(), {}));
  RunConfig c;
  c.command = "export-policy";
  c.checkpoint = (dir / "tft.ckpt").string();
  c.output = (dir / "out").string();
  std::ostringstream out;
  EXPECT_EQ(run_command(c, out), 0);
  const std::string want =
      "state,p_cooperate\nSTART,1.000000\nCC,1.000000\nCD,0.000000\nDC,1.000000\nDD,0.000000\n";
  EXPECT_EQ(out.str(), want);
  EXPECT_EQ(slurp(dir / "out" / "policy.csv"), want);

  // Import the CSV and export the resulting checkpoint again.
  c.checkpoint = (dir / "out" / "policy.csv").string();
  c.output = (dir / "imported").string();
  std::ostringstream imported;
  EXPECT_EQ(run_command(c, imported), 0);
  c.checkpoint = (dir / "imported" / "policy.ckpt").string();
  c.output = (dir / "again").string();
  std::ostringstream again;
  EXPECT_EQ(run_command(c, again), 0);
  EXPECT_EQ(again.str(), want);
}

TEST(Commands, CoinCheckpointExportsNoStateTable) {
  const fs::path dir = scratch("coinexport");
  RunConfig c;
  Rng rng(0);
  const auto params = GruAgentModel{c.agent_spec()}.init(rng);
  nn::save_checkpoint(dir / "a.ckpt", make_checkpoint("coin-agent", params, coin_agent_metadata(c, 0)));
  c.command = "export-policy";
  c.checkpoint = (dir / "a.ckpt").string();
  c.output = (dir / "out").string();
  std::ostringstream out;
  EXPECT_EQ(run_command(c, out), 0);
  EXPECT_FALSE(fs::exists(dir / "out" / "policy.csv"));
  const json m = json::parse(slurp(dir / "out" / "policy_manifest.json"));
  EXPECT_EQ(m["total_parameters"], params.total_dim());
  EXPECT_EQ(m["arrays"].size(), params.entries().size());
}

TEST(Commands, CorruptCheckpointIsAFormatError) {
  const fs::path dir = scratch("corrupt");
  std::ofstream(dir / "bad.ckpt") << "not a checkpoint";
  RunConfig c;
  c.command = "export-policy";
  c.checkpoint = (dir / "bad.ckpt").string();
  c.output = (dir / "out").string();
  std::ostringstream out;
  try {
    run_command(c, out);
    FAIL() << "corrupt checkpoint accepted";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("checkpoint"), std::string::npos) << e.what();
  }
  std::ofstream(dir / "bad.csv") << "state,p_cooperate\nSTART,1\nCC,2\n";
  c.checkpoint = (dir / "bad.csv").string();
  EXPECT_THROW(run_command(c, out), ConfigError);
}

TEST(Commands, LeagueWithOneGameLeavesStandardErrorBlank) {
  const fs::path dir = scratch("league");
  RunConfig c;
  c.command = "league";
  c.policies = {"AC", "AD"};
  c.games = 1;
  c.output = (dir / "out").string();
  std::ostringstream out;
  EXPECT_EQ(run_command(c, out), 0);
  std::istringstream csv(slurp(dir / "out" / "league.csv"));
  std::string line;
  int rows = 0;
  std::getline(csv, line);
  while (std::getline(csv, line)) {
    ++rows;
    EXPECT_NE(line.find(",,1"), std::string::npos) << line;
  }
  EXPECT_EQ(rows, 4);
  EXPECT_TRUE(fs::exists(dir / "out" / "league.svg"));
  EXPECT_TRUE(fs::exists(dir / "out" / "league.json"));
}

TEST(Commands, LeagueRejectsTwoSearchEntriesAndUnknownNames) {
  RunConfig c;
  c.command = "league";
  c.output = (scratch("league-bad") / "out").string();
  std::ostringstream out;
  c.policies = {"MCTS", "MCTS", "AC"};
  EXPECT_THROW(run_command(c, out), ConfigError);
  c.policies = {"AC", "no/such/agent.ckpt"};
  try {
    run_command(c, out);
    FAIL() << "unknown policy accepted";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("AD"), std::string::npos) << e.what();  // lists the candidates
  }
}

TEST(Commands, TrainIpdWritesPolicyTablePerSeed) {
  const fs::path dir = scratch("ipd");
  RunConfig c;
  c.command = "train-ipd";
  c.ipd_train.iterations = 5;
  c.num_seeds = 2;
  c.output = (dir / "out").string();
  std::ostringstream out;
  EXPECT_EQ(run_command(c, out), 0);
  for (int s = 0; s < 2; ++s) {
    const fs::path sd = dir / "out" / ("seed-" + std::to_string(s));
    EXPECT_TRUE(fs::exists(sd / "policy.csv"));
    EXPECT_EQ(nn::load_checkpoint(sd / "policy.ckpt").kind, "ipd-mlp");
  }
  EXPECT_NE(out.str().find("/2 seeds"), std::string::npos) << out.str();
}

// --- the executable --------------------------------------------------------

TEST(Executable, ExitCodes) {
  const fs::path dir = scratch("exe");
  const fs::path log = dir / "out.txt";
  EXPECT_EQ(run_cli("--version", log), 0);
  EXPECT_EQ(run_cli("train-coin --set brs.batch_size=0 --output " + (dir / "a").string(), log), 2);
  EXPECT_NE(slurp(log).find("brs.batch_size"), std::string::npos);
  EXPECT_EQ(run_cli("league AC --output " + (dir / "b").string(), log), 2);
  EXPECT_EQ(run_cli("no-such-command", log), 2);
  EXPECT_EQ(run_cli("eval --checkpoint " + (dir / "missing.ckpt").string(), log), 2);
  EXPECT_EQ(run_cli("train-ipd --iterations 0 --output " + (dir / "c").string(), log), 0);
}

TEST(Executable, PrintConfigAppliesFileThenFlags) {
  const fs::path dir = scratch("layers");
  std::ofstream(dir / "c.json") << R"({"seed": 5, "brs": {"batch_size": 16}, "coin": {"grid": 4}})";
  const fs::path log = dir / "out.txt";
  ASSERT_EQ(run_cli("train-coin --print-config --config " + (dir / "c.json").string() +
                        " --batch-size 8 --set coin.length=20",
                    log),
            0);
  const json j = json::parse(slurp(log));
  EXPECT_EQ(j["seed"], 5);
  EXPECT_EQ(j["brs"]["batch_size"], 8);
  EXPECT_EQ(j["coin"]["grid"], 4);
  EXPECT_EQ(j["coin"]["length"], 20);
}

TEST(Executable, OutputRootComesFromTheEnvironment) {
  const fs::path dir = scratch("root");
  const fs::path log = dir / "out.txt";
  const std::string cmd = "BRS_OUTPUT_ROOT=" + dir.string() + " " + BRS_CLI_PATH +
                          " train-ipd --iterations 0 --output rel > " + log.string() + " 2>&1";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(dir / "rel" / "manifest.json"));
}
