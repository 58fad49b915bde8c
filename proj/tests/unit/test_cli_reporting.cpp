#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "toralmix/commands.hpp"

using namespace toralmix;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("toralmix_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

std::string config_error_of(const std::string& text) {
  try {
    auto c = parse_config_string(text);
    validate(c);
  } catch (const config_error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(LogLog, PowerLaw) {
  std::vector<double> x, y;
  for (int n = 1; n <= 100; ++n) x.push_back(n), y.push_back(std::pow(double(n), -3.0));
  const auto f = loglog_slope(x, y);
  EXPECT_NEAR(f.slope, -3.0, 1e-12);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
}

TEST(LogLog, ConstantHasZeroSlope) {
  std::vector<double> x, y;
  for (int n = 1; n <= 50; ++n) x.push_back(n), y.push_back(4.2);
  EXPECT_NEAR(loglog_slope(x, y).slope, 0.0, 1e-14);
}

TEST(LogLog, LogPeriodicModulation) {
  std::vector<double> x, y;
  for (int n = 1; n <= 4096; ++n) x.push_back(n), y.push_back(std::pow(double(n), -2.0) * (1 + 0.1 * std::sin(std::log(double(n)))));
  const double s = loglog_slope(x, y).slope;
  EXPECT_GE(s, -2.1);
  EXPECT_LE(s, -1.9);
}

TEST(LogLog, DegenerateInput) {
  std::vector<double> x{1, 2, 3, 4, 5}, y{1, 2, 3, 4, 5};
  EXPECT_THROW(loglog_slope(x, y), fit_error);
  std::vector<double> x2, y2;
  for (int n = 1; n <= 20; ++n) x2.push_back(n), y2.push_back(n == 7 ? 0.0 : 1.0 / n);
  EXPECT_THROW(loglog_slope(x2, y2), fit_error);
}

TEST(Report, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Report, CsvFormatting) {
  CsvTable t{{"n", "x", "label"}};
  t.add(1, 0.1, "plain");
  t.add(2, 1e-300, "a,b");
  t.add(3, std::numeric_limits<double>::quiet_NaN(), "say \"hi\"");
  EXPECT_EQ(t.csv(), "n,x,label\n1,0.1,plain\n2,1e-300,\"a,b\"\n3,nan,\"say \"\"hi\"\"\"\n");
  EXPECT_EQ(t.dat().substr(0, 12), "# n x label\n");
  EXPECT_THROW(t.add(1, 2.0), std::logic_error);
}

TEST(Config, DefaultsAndPresets) {
  const auto c = parse_config_string("");
  EXPECT_EQ(c.preset, "lsv-0.5");
  EXPECT_EQ(c.m, 128);
  EXPECT_EQ(c.phi_max, 1024);
  EXPECT_EQ(c.N, 1024);
  EXPECT_DOUBLE_EQ(c.theta, 0.75);
  const auto inf = parse_config_string("preset = \"lsv-1.5\"\n");
  EXPECT_EQ(inf.N, 4096);
  EXPECT_FALSE(inf.finite_measure());
  // the command line preset wins, explicit file values still apply on top
  const auto both = parse_config_string("preset = \"lsv-1.5\"\n[grid]\nm = 64\n", "lsv-0.3");
  EXPECT_DOUBLE_EQ(both.gamma, 0.3);
  EXPECT_EQ(both.m, 64);
  EXPECT_THROW(parse_config_string("preset = \"nope\"\n"), config_error);
}

TEST(Config, FieldLevelErrors) {
  EXPECT_NE(config_error_of("[run]\nbogus = 1\n").find("run.bogus"), std::string::npos);
  EXPECT_NE(config_error_of("[grid]\nm = \"many\"\n").find("grid.m"), std::string::npos);
  EXPECT_NE(config_error_of("[grid]\nm = 1\n").find("grid.m"), std::string::npos);
  EXPECT_NE(config_error_of("[run]\nomega_count = 1000\n").find("run.omega_count"), std::string::npos);
  EXPECT_NE(config_error_of("[scheme]\ntheta = 1.5\n").find("scheme.theta"), std::string::npos);
  EXPECT_NE(config_error_of("[observables.v]\nname = \"custom\"\n").find("observables.v.modes"), std::string::npos);
  EXPECT_NE(config_error_of("[[observables.v.modes]]\npoly = [1]\n").find("observables.v.modes[0].k"), std::string::npos);
  EXPECT_NE(config_error_of("[map\n").find("config"), std::string::npos);
  EXPECT_EQ(config_error_of("[run]\nN = 10\n"), "");
}

TEST(Config, RegimeConsistency) {
  EXPECT_NE(config_error_of("preset = \"lsv-1.5\"\n[checks]\nfinite = true\n").find("checks.finite"), std::string::npos);
  EXPECT_NE(config_error_of("[checks]\ninfinite = true\n").find("checks.infinite"), std::string::npos);
  auto c = parse_config_string("preset = \"lsv-1.5\"\n");
  validate(c);
  EXPECT_FALSE(*c.finite_checks);
  EXPECT_TRUE(*c.infinite_checks);
}

TEST(Config, CoarseGridWarns) {
  auto c = parse_config_string("[grid]\nm = 8\n");
  const auto w = validate(c);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_NE(w[0].find("grid.m"), std::string::npos);
}

TEST(Config, CustomObservableModes) {
  auto c = parse_config_string(R"(
[observables.v]
name = "custom"
[[observables.v.modes]]
k = [1]
poly = [0.5]
trig = [[1, 0.25, 0.0]]
[[observables.v.modes]]
k = [-1]
poly = [0.5]
trig = [[-1, 0.25, 0.0]]
)");
  validate(c);
  const auto v = make_observable(c.v, 1, Interval{0.5, 1.0});
  const double x = 0.7, psi = 0.4;
  // 2 Re e^{i psi} (1/2 + e^{2 pi i x}/4)
  const double expect = std::cos(psi) + 0.5 * std::cos(psi + two_pi * x);
  EXPECT_NEAR(v.evaluate(x, {psi}), expect, 1e-14);
}

TEST(Manifest, HashIgnoresOutputLocationAndThreads) {
  ExperimentConfig a, b, c;
  b.out_dir = "elsewhere";
  b.threads = 7;
  c.seed = a.seed + 1;
  EXPECT_EQ(Manifest("tails", a, "x").config_hash(), Manifest("tails", b, "y").config_hash());
  EXPECT_NE(Manifest("tails", a, "x").config_hash(), Manifest("tails", c, "x").config_hash());
}

TEST(Commands, TailsIsReproducibleAndHashed) {
  const auto d1 = scratch("tails1"), d2 = scratch("tails2");
  ExperimentConfig c = parse_config_string("[scheme]\nphi_max = 512\n[run]\nN = 512\n");
  std::ostringstream log;
  c.out_dir = d1.string();
  EXPECT_EQ(run_command("tails", c, log), exit_pass);
  c.out_dir = d2.string();
  c.threads = 1;
  EXPECT_EQ(run_command("tails", c, log), exit_pass);
  const std::string csv = slurp(d1 / "tails.csv");
  EXPECT_EQ(csv, slurp(d2 / "tails.csv"));
  const auto m = nlohmann::json::parse(slurp(d1 / "manifest.json"));
  EXPECT_EQ(m["command"], "tails");
  EXPECT_TRUE(m["all_pass"].get<bool>());
  EXPECT_NEAR(m["results"]["beta_hat"].get<double>(), 2.0, 0.15);
  ASSERT_EQ(m["files"].size(), 1u);
  EXPECT_EQ(m["files"][0]["sha256"], sha256_hex(csv));
  EXPECT_EQ(m["config_hash"], nlohmann::json::parse(slurp(d2 / "manifest.json"))["config_hash"]);
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST(Commands, WarningsReachTheManifest) {
  const auto d = scratch("warn");
  ExperimentConfig c = parse_config_string("[grid]\nm = 8\n[scheme]\nphi_max = 64\n");
  c.out_dir = d.string();
  std::ostringstream log;
  EXPECT_EQ(run_command("spectrum", c, log), exit_pass);
  const auto m = nlohmann::json::parse(slurp(d / "manifest.json"));
  bool coarse = false, ulam = false;
  for (const auto& w : m["warnings"]) {
    coarse = coarse || w.get<std::string>().find("grid.m") != std::string::npos;
    ulam = ulam || w.get<std::string>().find("Ulam grid") != std::string::npos;
  }
  EXPECT_TRUE(coarse);
  EXPECT_TRUE(ulam);
  EXPECT_GT(m["truncation"]["mu_Z_beyond_phi_max"].get<double>(), 0.0);
  fs::remove_all(d);
}

TEST(Commands, ErrorsAndRegimeMismatch) {
  std::ostringstream log;
  EXPECT_THROW(run_command("bogus", ExperimentConfig{}, log), config_error);
  const auto d = scratch("regime");
  ExperimentConfig c;
  c.out_dir = d.string();
  EXPECT_EQ(run_command("check-infinite", c, log), exit_error);
  const auto m = nlohmann::json::parse(slurp(d / "manifest.json"));
  EXPECT_NE(m["error"].get<std::string>().find("infinite"), std::string::npos);
  fs::remove_all(d);
}

TEST(Commands, FailedCheckGivesExitTwo) {
  const auto d = scratch("fail");
  ExperimentConfig c = parse_config_string("[scheme]\nphi_max = 512\n[run]\nN = 512\n[tolerances]\ntail_beta = 1e-9\n");
  c.out_dir = d.string();
  std::ostringstream log;
  EXPECT_EQ(run_command("tails", c, log), exit_check_failed);
  fs::remove_all(d);
}
