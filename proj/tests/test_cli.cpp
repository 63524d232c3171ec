#include <gtest/gtest.h>

#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gapscan/cli/campaign.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome gapscan(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(GAPSCAN_BIN) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kQuickScan = " --samples-per-class 3 --max-iters 8 --num-probes 100 --seed 5";
const std::string kZooArgs = " --classes 6 --hidden 32 --epochs 15 --train-per-class 120 --test-per-class 20";

class Cli : public ::testing::Test {
 protected:
  static fs::path dir() { return fs::temp_directory_path() / "gapscan_cli_tests"; }

  static void SetUpTestSuite() {
    fs::remove_all(dir());
    fs::create_directories(dir());
    ASSERT_EQ(gapscan("zoo" + kZooArgs + " --trigger patch --target 2 --seed 1 -o " + (dir() / "infected.gsz").string(),
                      dir() / "zoo1.log").code, 0);
    ASSERT_EQ(gapscan("zoo" + kZooArgs + " --trigger none --seed 1 -o " + (dir() / "clean.gsz").string(),
                      dir() / "zoo2.log").code, 0);
  }

  static std::string model(const char* name) { return (dir() / name).string(); }
};

TEST_F(Cli, CleanZooModelHasNoAttackRate) {
  const json s = json::parse(slurp(dir() / "clean.gsz.summary.json"));
  EXPECT_EQ(s.at("attack_success_rate"), "n/a");
  EXPECT_EQ(s.at("num_poisoned"), 0);
  EXPECT_EQ(s.at("trigger"), "none");
  const json inf = json::parse(slurp(dir() / "infected.gsz.summary.json"));
  EXPECT_GE(inf.at("attack_success_rate").get<double>(), 0.9);
  EXPECT_EQ(inf.at("target"), 2);
}

TEST_F(Cli, ZooIsDeterministicPerSeed) {
  ASSERT_EQ(gapscan("zoo" + kZooArgs + " --trigger patch --target 2 --seed 1 -o " + model("again.gsz"),
                    dir() / "zoo3.log").code, 0);
  EXPECT_EQ(slurp(model("infected.gsz")), slurp(model("again.gsz")));
  EXPECT_NE(slurp(model("infected.gsz")), slurp(model("clean.gsz")));
}

TEST_F(Cli, ZooRejectsBadArguments) {
  EXPECT_NE(gapscan("zoo --kind forest -o " + model("x.gsz"), dir() / "bad1.log").code, 0);
  EXPECT_NE(gapscan("zoo --trigger patch --target 12 --classes 10 -o " + model("x.gsz"), dir() / "bad2.log").code, 0);
  EXPECT_FALSE(fs::exists(model("x.gsz")));
}

TEST_F(Cli, InfectedScanExitsTwoAndWritesArtifacts) {
  const fs::path out = dir() / "scan_infected";
  const Outcome r = gapscan("scan --model " + model("infected.gsz") + kQuickScan + " -o " + out.string(), dir() / "s1.log");
  EXPECT_EQ(r.code, 2) << r.out;
  const json rep = json::parse(slurp(out / "report.json"));
  EXPECT_EQ(rep.at("verdict"), "infected");
  const auto flagged = rep.at("infected_labels").get<std::vector<int>>();
  EXPECT_NE(std::find(flagged.begin(), flagged.end(), 2), flagged.end());
  double top = 0.0;
  int top_label = -1;
  for (const json& l : rep.at("labels")) {
    if (l.at("anomaly_index").get<double>() > top) {
      top = l.at("anomaly_index").get<double>();
      top_label = l.at("label").get<int>();
    }
  }
  EXPECT_EQ(top_label, 2);
  EXPECT_TRUE(rep.contains("metadata"));
  EXPECT_TRUE(fs::exists(out / "effective_config.ini"));
  EXPECT_EQ(slurp(out / "scores.csv").rfind("label,score,anomaly_index,infected,partial,queries\n", 0), 0u);
  for (int t = 0; t < 6; ++t) EXPECT_TRUE(fs::exists(out / "heatmaps" / ("label_" + std::to_string(t) + ".csv")));
}

TEST_F(Cli, CleanScanExitsZero) {
  const fs::path out = dir() / "scan_clean";
  const Outcome r = gapscan("scan --model " + model("clean.gsz") + kQuickScan + " -o " + out.string(), dir() / "s2.log");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(json::parse(slurp(out / "report.json")).at("verdict"), "benign");
}

TEST_F(Cli, EffectiveConfigReproducesTheScan) {
  const fs::path a = dir() / "cfg_a";
  const fs::path b = dir() / "cfg_b";
  gapscan("scan --model " + model("infected.gsz") + kQuickScan + " --labels 1 2 3 -o " + a.string(), dir() / "c1.log");
  const Outcome r = gapscan("--config " + (a / "effective_config.ini").string() + " scan -j 3 -o " + b.string(),
                        dir() / "c2.log");
  EXPECT_EQ(r.code, 2) << r.out;
  ASSERT_TRUE(fs::exists(b / "scores.csv"));
  EXPECT_EQ(slurp(a / "scores.csv"), slurp(b / "scores.csv"));
}

TEST_F(Cli, RemoteScanMatchesLocalScan) {
  auto server = gapscan::cli::start_server(model("infected.gsz"), {});
  const fs::path local = dir() / "local";
  const fs::path remote = dir() / "remote";
  gapscan("scan --model " + model("infected.gsz") + kQuickScan + " --labels 0 2 4 -o " + local.string(), dir() / "r1.log");
  const Outcome r = gapscan("scan --endpoint " + server->endpoint() + kQuickScan + " --labels 0 2 4 -o " + remote.string(),
                        dir() / "r2.log");
  EXPECT_NE(r.code, 1) << r.out;
  EXPECT_EQ(slurp(local / "scores.csv"), slurp(remote / "scores.csv"));
  const json rep = json::parse(slurp(remote / "report.json"));
  EXPECT_EQ(server->queries_served(), rep.at("metadata").at("oracle_queries").get<std::uint64_t>());
}

TEST_F(Cli, UnreachableEndpointExitsOneWithErrorFile) {
  const fs::path out = dir() / "scan_down";
  const Outcome r = gapscan("scan --endpoint http://127.0.0.1:9 -o " + out.string(), dir() / "d.log");
  EXPECT_EQ(r.code, 1) << r.out;
  const json e = json::parse(slurp(out / "error.json"));
  EXPECT_EQ(e.at("endpoint"), "http://127.0.0.1:9");
  EXPECT_NE(e.at("message").get<std::string>().find("127.0.0.1:9"), std::string::npos);
  EXPECT_FALSE(fs::exists(out / "report.json"));
}

TEST_F(Cli, ProbeWritesFlipCounts) {
  const fs::path out = dir() / "probe";
  EXPECT_EQ(gapscan("probe --model " + model("infected.gsz") + " --samples 12 --trials 2 -o " + out.string(),
                    dir() / "p1.log").code, 0);
  const std::string csv = slurp(out / "probe.csv");
  EXPECT_EQ(csv.rfind("sample,flips,trials\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 13);
  EXPECT_TRUE(fs::exists(out / "probe_summary.txt"));
  EXPECT_EQ(gapscan("probe --model " + model("infected.gsz") + " --trials 0 -o " + out.string(), dir() / "p2.log").code, 1);
}

TEST_F(Cli, SimulatePrintsTheAnalyticTail) {
  const Outcome r = gapscan("simulate --p 0.47 --k-max 6 --trials 20000 --seed 3", dir() / "sim1.log");
  ASSERT_EQ(r.code, 0);
  std::istringstream lines(r.out);
  std::string line, last;
  std::size_t rows = 0;
  std::getline(lines, line);
  EXPECT_EQ(line, "k,empirical,analytic,three_sigma,within");
  while (std::getline(lines, line)) {
    ++rows;
    last = line;
  }
  EXPECT_EQ(rows, 6u);
  std::vector<std::string> f;
  std::istringstream cells(last);
  for (std::string c; std::getline(cells, c, ',');) f.push_back(c);
  ASSERT_EQ(f.size(), 5u);
  EXPECT_EQ(f[0], "6");
  EXPECT_NEAR(std::stod(f[2]), 0.0107, 1e-4);
  EXPECT_EQ(f[4], "1");

  const Outcome all = gapscan("simulate --p 1 --k-max 3 --trials 100", dir() / "sim2.log");
  EXPECT_NE(all.out.find("\n3,1,1,"), std::string::npos) << all.out;
  EXPECT_NE(gapscan("simulate --p 1.5", dir() / "sim3.log").code, 0);
}

}  // namespace
