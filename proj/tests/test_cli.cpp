#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string output;
};

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("clonesim_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome cli(const std::string& args, const fs::path& dir) {
  const auto log = dir / "cli.log";
  const std::string cmd = std::string(CLONESIM_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

int lines(const std::string& text) {
  int n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

}  // namespace

TEST(Cli, DefaultsAccepted) {
  const auto dir = scratch("defaults");
  const auto r = cli("simulate --out " + (dir / "out").string(), dir);
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("srptms+c"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "out" / "simulate.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "run_meta.json"));
}

TEST(Cli, TenReplicationsTenFilesPlusAverage) {
  const auto dir = scratch("reps");
  const auto out = dir / "out";
  const auto r = cli("simulate --jobs 40 --replications 10 --out " + out.string(), dir);
  ASSERT_EQ(r.code, 0) << r.output;
  for (int i = 0; i < 10; ++i) EXPECT_TRUE(fs::exists(out / ("simulate_rep=" + std::to_string(i) + ".csv")));
  EXPECT_FALSE(fs::exists(out / "simulate_rep=10.csv"));
  EXPECT_TRUE(fs::exists(out / "simulate.csv"));
}

TEST(Cli, MissingWorkloadExitsTwoNamingPath) {
  const auto dir = scratch("missing");
  const auto r = cli("simulate --workload /no/such/jobs.csv --out " + (dir / "out").string(), dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("/no/such/jobs.csv"), std::string::npos);
}

TEST(Cli, UsageErrorsExitTwo) {
  const auto dir = scratch("usage");
  EXPECT_EQ(cli("", dir).code, 2);
  EXPECT_EQ(cli("simulate --policy nope", dir).code, 2);
  EXPECT_EQ(cli("simulate --epsilon 1.5", dir).code, 2);
  EXPECT_EQ(cli("sweep temperature", dir).code, 2);
  EXPECT_EQ(cli("simulate --workload x.csv --jobs 5", dir).code, 2);
}

TEST(Cli, SweepEpsilonFiveRows) {
  const auto dir = scratch("sweep");
  const auto out = dir / "out";
  const auto r = cli("sweep epsilon --risk 0 --jobs 40 --out " + out.string(), dir);
  ASSERT_EQ(r.code, 0) << r.output;
  const auto csv = slurp(out / "sweep_epsilon.csv");
  EXPECT_EQ(lines(csv), 6);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epsilon,weighted_avg_s,unweighted_avg_s,jobs,clones");
  EXPECT_TRUE(fs::exists(out / "sweep_epsilon=0.2.csv"));
  EXPECT_TRUE(fs::exists(out / "sweep_epsilon=1.csv"));
}

TEST(Cli, SweepMachinesThreeRows) {
  const auto dir = scratch("machines");
  const auto out = dir / "out";
  const auto r = cli("sweep machines --machine-grid 20,40,80 --jobs 30 --out " + out.string(), dir);
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(lines(slurp(out / "sweep_machines.csv")), 4);
  EXPECT_TRUE(fs::exists(out / "sweep_machines=40.csv"));
}

TEST(Cli, CompareThreeRows) {
  const auto dir = scratch("compare");
  const auto out = dir / "out";
  const auto r = cli("compare --jobs 40 --out " + out.string(), dir);
  ASSERT_EQ(r.code, 0) << r.output;
  const auto csv = slurp(out / "compare.csv");
  EXPECT_EQ(lines(csv), 4);
  for (const char* p : {"srptms+c", "mantri", "sca-lite"}) {
    EXPECT_NE(csv.find(std::string("\n") + p + ","), std::string::npos) << p;
    EXPECT_TRUE(fs::exists(out / (std::string("compare_policy=") + p + ".csv")));
  }
}

TEST(Cli, GenWorkloadThenSimulateFromFile) {
  const auto dir = scratch("gen");
  const auto out = dir / "out";
  ASSERT_EQ(cli("gen-workload --jobs 25 --out " + out.string(), dir).code, 0);
  const auto path = out / "gen-workload.csv";
  ASSERT_TRUE(fs::exists(path));
  const auto r = cli("simulate --workload " + path.string() + " --out " + (dir / "sim").string(), dir);
  EXPECT_EQ(r.code, 0) << r.output;
}

TEST(Cli, VerifyBoundsWritesReport) {
  const auto dir = scratch("verify");
  const auto out = dir / "out";
  const auto r = cli("verify-bounds --jobs 10 --family deterministic --machines 50 --replications 3 --out " +
                         out.string(),
                     dir);
  EXPECT_TRUE(r.code == 0 || r.code == 1) << r.output;
  EXPECT_TRUE(fs::exists(out / "verify-bounds_risk=3.json"));
}

TEST(Cli, ConfigFileFlagsOverride) {
  const auto dir = scratch("config");
  {
    std::ofstream cfg(dir / "run.toml");
    cfg << "machines = 30\njobs = 20\npolicy = \"fair\"\n";
  }
  const auto r = cli("simulate --config " + (dir / "run.toml").string() + " --policy mantri --out " +
                         (dir / "out").string(),
                     dir);
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("mantri"), std::string::npos);
  EXPECT_NE(r.output.find("jobs 20"), std::string::npos);
}

TEST(Cli, IdenticalRunsByteIdentical) {
  const auto dir = scratch("determinism");
  const std::string args = "simulate --jobs 40 --replications 2 --seed 7 --out ";
  ASSERT_EQ(cli(args + (dir / "a").string(), dir).code, 0);
  ASSERT_EQ(cli(args + (dir / "b").string(), dir).code, 0);
  int compared = 0;
  for (const auto& e : fs::directory_iterator(dir / "a")) {
    if (e.path().filename() == "run_meta.json") continue;
    EXPECT_EQ(slurp(e.path()), slurp(dir / "b" / e.path().filename())) << e.path();
    ++compared;
  }
  EXPECT_EQ(compared, 5);
}
