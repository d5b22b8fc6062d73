#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "app/commands.h"
#include "app/config.h"

namespace ratecert::app {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::path(::testing::TempDir()) / DirName(info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  static std::string DirName(const std::string& name) { return "ratecert_cli_" + name; }

  std::string Write(const std::string& name, const std::string& content) const {
    const fs::path path = dir_ / name;
    std::ofstream(path) << content;
    return path.string();
  }

  int Run(const std::vector<std::string>& args, std::string* log = nullptr) const {
    std::vector<const char*> argv{"ratecert"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = Main(static_cast<int>(argv.size()), argv.data(), out, err);
    if (log != nullptr) *log = out.str() + err.str();
    return code;
  }

  std::string Out(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

std::string Slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Rows of a CSV file keyed by column name.
std::vector<std::map<std::string, std::string>> ReadCsv(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  std::vector<std::string> header;
  std::vector<std::map<std::string, std::string>> rows;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  if (std::getline(in, line)) header = split(line);
  while (std::getline(in, line)) {
    const auto cells = split(line);
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(row);
  }
  return rows;
}

TEST_F(CliTest, SchemaRejectsBadConfigurations) {
  const std::string sys = Write("cubic.sys", "f1 = -x1^3;\n");
  const std::string head = "[system]\nfile = " + sys + "\n";
  const std::vector<std::string> bad = {
      head + "[analysis]\ncondition = exponential\nbogus = 1\n",
      head + "[analysis]\ncondition = exponential\n[sweep]\nd =\n",
      head + "[analysis]\ncondition = exponential\nd = two\n",
      head + "[analysis]\ncondition = sideways\n",
      head + "[analysis]\ncondition = rational_ii\nr = 4\np = 2\n",
      head + "[simulate]\nics = cube\n",
      "[system]\nfile = " + (dir_ / "missing.sys").string() + "\n",
      "[analysis]\ncondition = exponential\n",
  };
  for (const auto& text : bad) {
    EXPECT_THROW(ParseConfig(text, dir_.string()), ConfigError) << text;
  }
  EXPECT_NO_THROW(ParseConfig(head + "[analysis]\ncondition = exponential\n[sweep]\nd = 1, 2\n", dir_.string()));
}

TEST_F(CliTest, ExitCodesFollowTheFailureKind) {
  const std::string bad = Write("bad.ini", "[system]\nfile = nowhere.sys\n");
  EXPECT_EQ(Run({"analyze", "--config", bad, "--out", Out("o1")}), kExitConfigError);
  EXPECT_EQ(Run({"analyze", "--config", Out("absent.ini")}), kExitConfigError);
  EXPECT_EQ(Run({}), kExitConfigError);
  EXPECT_EQ(Run({"analyze"}), kExitConfigError);

  Write("unstable.sys", "f1 = x1;\n");
  const std::string unstable = Write("unstable.ini",
                                     "[system]\nfile = unstable.sys\n[analysis]\ncondition = exponential\n"
                                     "d = 1\n[output]\nwall_time = false\n");
  EXPECT_EQ(Run({"analyze", "--config", unstable, "--out", Out("o2")}), kExitInfeasibleAtKLo);
}

// x(t) = x0 e^{-t} exactly, so the sampled rate at unit gain is 1.
TEST_F(CliTest, LinearDecaySimulatesAtUnitRate) {
  Write("linear.sys", "f1 = -x1;\nf2 = -x2;\n");
  const std::string cfg = Write("linear.ini",
                                "[system]\nfile = linear.sys\n[simulate]\nics = sphere\ncount = 8\nradius = 2\n"
                                "horizon = 20\ngain = 1\nfamily = exponential\n");
  ASSERT_EQ(Run({"simulate", "--config", cfg, "--out", Out("sim")}), kExitOk);
  const auto rows = ReadCsv(Out("sim") + "/simulate.csv");
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_NEAR(std::stod(rows[0].at("kSim")), 1.0, 1e-4);
  EXPECT_EQ(rows[0].at("gainViolated"), "false");
  EXPECT_EQ(ReadCsv(Out("sim") + "/ic_results.csv").size(), 8u);
  EXPECT_FALSE(ReadCsv(Out("sim") + "/worst_trajectory.csv").empty());
}

TEST_F(CliTest, GrowthIsReportedAsGainViolation) {
  Write("growth.sys", "f1 = x1;\n");
  const std::string cfg = Write("growth.ini",
                                "[system]\nfile = growth.sys\n[simulate]\nics = points\npoints = 1; -0.5\n"
                                "horizon = 3\ngain = 1\nfamily = exponential\n");
  ASSERT_EQ(Run({"simulate", "--config", cfg, "--out", Out("sim")}), kExitOk);
  const auto rows = ReadCsv(Out("sim") + "/simulate.csv");
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].at("gainViolated"), "true");
}

// For f = -x^3 the function V = x^2 gives dV/dt = -2 V^2 exactly, so both
// rational conditions at unit gain certify rate 2, and x(t)^2 = x0^2 / (1 + 2 x0^2 t)
// is the same bound.
TEST_F(CliTest, CubicDecayComparesAtUnitRatios) {
  Write("cubic.sys", "f1 = -x1^3;\n");
  const std::string cfg = Write("cubic.ini",
                                "[system]\nfile = cubic.sys\n[analysis]\ncondition = rational_i\np = 2\ngain = 1\n"
                                "[sweep]\nd = 1\n[simulate]\nics = sphere\ncount = 2\nradius = 1\nhorizon = 50\n"
                                "gain = 1\n");
  ASSERT_EQ(Run({"compare", "--config", cfg, "--out", Out("cmp")}), kExitOk);
  const auto rows = ReadCsv(Out("cmp") + "/compare.csv");
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_NEAR(std::stod(rows[0].at("k_i")), 2.0, 2e-3);
  EXPECT_NEAR(std::stod(rows[0].at("k_ii")), 2.0, 2e-3);
  EXPECT_NEAR(std::stod(rows[0].at("k_sim")), 2.0, 1e-3);
  EXPECT_NEAR(std::stod(rows[0].at("ratio_i_over_ii")), 1.0, 2e-3);
  EXPECT_NEAR(std::stod(rows[0].at("ratio_ii_over_sim")), 1.0, 2e-3);
}

TEST_F(CliTest, OutputsDoNotDependOnJobs) {
  Write("vdp.sys", "f1 = -x2;\nf2 = x1 + (x1^2 - 1)*x2;\n");
  const std::string cfg = Write("vdp.ini",
                                "[system]\nfile = vdp.sys\n[analysis]\ncondition = exponential\n"
                                "[domain]\ntemplate = R^2 - x1^2 - x2^2\n[sweep]\nd = 2\nradius = 0.2, 0.6\n"
                                "[simulate]\nics = ball\ncount = 16\nradius = 0.5\nhorizon = 10\ngain = 3\n"
                                "[run]\nseed = 7\n[output]\nwall_time = false\n");
  for (const char* command : {"analyze", "simulate"}) {
    ASSERT_EQ(Run({command, "--config", cfg, "--out", Out("j1"), "--jobs", "1"}), kExitOk) << command;
    ASSERT_EQ(Run({command, "--config", cfg, "--out", Out("j3"), "--jobs", "3"}), kExitOk) << command;
  }
  for (const char* file : {"summary.csv", "simulate.csv", "ic_results.csv", "worst_trajectory.csv"}) {
    const std::string a = Slurp(Out("j1") + "/" + file);
    EXPECT_FALSE(a.empty()) << file;
    EXPECT_EQ(a, Slurp(Out("j3") + "/" + file)) << file;
  }
}

TEST_F(CliTest, SeedControlsSampling) {
  Write("linear.sys", "f1 = -x1;\nf2 = -2*x2;\n");
  const std::string cfg = Write("seed.ini",
                                "[system]\nfile = linear.sys\n[simulate]\nics = ball\ncount = 4\nradius = 1\n"
                                "horizon = 5\ngain = 1\nfamily = exponential\n[output]\nwall_time = false\n");
  ASSERT_EQ(Run({"simulate", "--config", cfg, "--out", Out("a"), "--seed", "11"}), kExitOk);
  ASSERT_EQ(Run({"simulate", "--config", cfg, "--out", Out("b"), "--seed", "11"}), kExitOk);
  ASSERT_EQ(Run({"simulate", "--config", cfg, "--out", Out("c"), "--seed", "12"}), kExitOk);
  EXPECT_EQ(Slurp(Out("a") + "/ic_results.csv"), Slurp(Out("b") + "/ic_results.csv"));
  EXPECT_NE(Slurp(Out("a") + "/ic_results.csv"), Slurp(Out("c") + "/ic_results.csv"));
}

TEST_F(CliTest, FinishedPointsAreReused) {
  Write("cubic.sys", "f1 = -x1^3;\nf2 = -x2^3;\n");
  const std::string text =
      "[system]\nfile = cubic.sys\n[analysis]\ncondition = rational_ii\np = 2\n[sweep]\nd = 1, 2\n"
      "[output]\nwall_time = false\n";
  const std::string cfg = Write("resume.ini", text);
  std::string log;
  ASSERT_EQ(Run({"analyze", "--config", cfg, "--out", Out("r")}, &log), kExitOk);
  EXPECT_EQ(log.find("reused"), std::string::npos);
  const std::string first = Slurp(Out("r") + "/summary.csv");

  fs::remove(Out("r") + "/summary.csv");
  ASSERT_EQ(Run({"analyze", "--config", cfg, "--out", Out("r")}, &log), kExitOk);
  EXPECT_NE(log.find("analyze d=1: reused"), std::string::npos) << log;
  EXPECT_NE(log.find("analyze d=2: reused"), std::string::npos) << log;
  EXPECT_EQ(Slurp(Out("r") + "/summary.csv"), first);

  // A changed parameter invalidates the stored points.
  const std::string changed = Write("resume.ini", text + "[run]\nseed = 5\n");
  ASSERT_EQ(Run({"analyze", "--config", changed, "--out", Out("r")}, &log), kExitOk);
  EXPECT_EQ(log.find("reused"), std::string::npos) << log;
}

}  // namespace
}  // namespace ratecert::app
