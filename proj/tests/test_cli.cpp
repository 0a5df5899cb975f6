#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "opekit/cli.hpp"

using namespace opekit;
using cli::RunConfig;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

// Runs the CLI binary with stderr folded into stdout.
Result run_cli(const std::string& args) {
  const char* bin = std::getenv("OPE_KIT_CLI");
  if (!bin) return {};
  const std::string cmd = std::string(bin) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  Result r;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string l; std::getline(ss, l);) out.push_back(l);
  return out;
}

std::string temp_file(const std::string& name, const std::string& content) {
  const std::string path = testing::TempDir() + name;
  std::ofstream(path) << content;
  return path;
}

#define REQUIRE_CLI()                                                   \
  if (!std::getenv("OPE_KIT_CLI")) GTEST_SKIP() << "OPE_KIT_CLI not set"

}  // namespace

TEST(Cli, RemainderCsvSchema) {
  REQUIRE_CLI();
  const auto cfg = temp_file("points.json", R"({"points": [[0.5,0,0,0],[0,0,0,0],[0,1,0,0]]})");
  const Result r = run_cli("remainder --ops \"phi,phi,phi\" --target \"phi\" --split 2 --dmax 10 --points @" + cfg);
  ASSERT_EQ(r.code, 0) << r.out;
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 14u);
  EXPECT_EQ(ls[0], std::string("# opekit ") + cli::kVersion);
  EXPECT_NE(ls[1].find("\"seed\":42"), std::string::npos);
  EXPECT_NE(ls[1].find("\"split\":2"), std::string::npos);
  EXPECT_EQ(ls[2], "D,R,abs_R,bound");
  EXPECT_EQ(ls[3].rfind("0,", 0), 0u);
  EXPECT_EQ(ls[13].rfind("10,", 0), 0u);
}

TEST(Cli, MalformedOperatorReportsOffset) {
  REQUIRE_CLI();
  const Result r = run_cli("coeff --ops \"d[1,2]phi,phi\" --target 1 --points \"0,0,0,0;1,0,0,0\"");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("byte 5"), std::string::npos) << r.out;
}

TEST(Cli, ValidationErrorsExitTwo) {
  REQUIRE_CLI();
  EXPECT_EQ(run_cli("coeff --bogus").code, 2);
  EXPECT_EQ(run_cli("frobnicate").code, 2);
  EXPECT_EQ(run_cli("coeff --ops phi,phi --target 1 --points \"0,0,0;1,0,0,0\"").code, 2);
  EXPECT_EQ(run_cli("coeff --ops phi,phi --target 1 --points \"0,0,0,0;0,0,0,0\"").code, 2);
  EXPECT_EQ(run_cli("coeff --ops phi,phi --target 1 --points \"0,0,0,0;1,0,0,0\" --order 2").code, 2);
  // xi >= 1 leaves the domain of the remainder bound.
  EXPECT_EQ(run_cli("bounds --ops phi,phi,phi --target phi --split 2 --points \"3,0,0,0;0,0,0,0;1,0,0,0\"").code, 2);
}

TEST(Cli, FirstOrderIsByteDeterministic) {
  REQUIRE_CLI();
  const std::string args =
      "first-order --ops phi,phi,phi,phi --target 1 --points \"0,0,0,0;1,0,0,0;0,1,0,0;0.5,0.5,0.7,0\" "
      "--samples 2000 --seed 9 --workers 1";
  const Result a = run_cli(args), b = run_cli(args);
  ASSERT_EQ(a.code, 0) << a.out;
  EXPECT_EQ(a.out, b.out);
  const Result c = run_cli(args + " --seed 10");
  EXPECT_NE(a.out, c.out);
}

TEST(Cli, CoefficientMatchesLibrary) {
  REQUIRE_CLI();
  const Result r = run_cli("coeff --ops phi,phi --target 1 --points \"0,0,0,0;1,0,0,0\" --format json");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["version"], cli::kVersion);
  EXPECT_EQ(j["columns"], (std::vector<std::string>{"value", "error"}));
  EXPECT_EQ(j["rows"][0][0].get<double>(), propagator({1, 0, 0, 0}, {1.0}));
}

TEST(Cli, ConfigFileWithFlagOverrides) {
  REQUIRE_CLI();
  const auto cfg = temp_file("run.json", R"({"ops": "phi,phi", "target": "1", "mass": 2.0,
                                             "points": [[0,0,0,0],[1,0,0,0]]})");
  const Result r = run_cli("coeff --config " + cfg + " --mass 1 --format json");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["config"]["mass"].get<double>(), 1.0);
  EXPECT_EQ(j["rows"][0][0].get<double>(), propagator({1, 0, 0, 0}, {1.0}));
}

// emit -> parse -> emit gives identical text.
TEST(Cli, EmittedConfigRoundTrips) {
  REQUIRE_CLI();
  const Result a = run_cli("massless --ops phi,phi --target 1 --points \"0,0,0,0;0.1,0.2,0.3,0.4\" --L 2.5 "
                           "--seed 7 --ref 0 --emit-config");
  ASSERT_EQ(a.code, 0) << a.out;
  const auto path = temp_file("emitted.json", a.out);
  const Result b = run_cli("massless --config " + path + " --emit-config");
  EXPECT_EQ(a.out, b.out);
}

TEST(Cli, VerifyEmitsJsonReport) {
  REQUIRE_CLI();
  const Result r = run_cli("verify --suite 3,5 --seed 42");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto body = r.out.substr(r.out.find('{'));
  const auto j = nlohmann::json::parse(body);
  EXPECT_TRUE(j["passed"].get<bool>());
  ASSERT_EQ(j["results"].size(), 2u);
  EXPECT_EQ(j["results"][0]["id"], 3);
  EXPECT_EQ(j["config"]["seed"], 42);
  EXPECT_EQ(run_cli("verify --suite 11").code, 2);
}

TEST(Cli, GammaSubcommand) {
  REQUIRE_CLI();
  const Result r = run_cli("gamma --ops \"phi^4\" --target \"phi^4\" --L 1 --mass 0.5 --format json");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["rows"][0][2].get<double>(), gamma_mixing(interaction_op(), interaction_op(), 1.0, {0.5}));
}

TEST(CliConfig, JsonRoundTrip) {
  RunConfig c;
  c.command = "remainder";
  c.ops = "d[0,1,0,0]phi*phi^2,phi";
  c.points = {{0.1, -0.2, 1e-300, 3.5}, {1.0 / 3.0, 0, 0, 0}};
  c.reference = 0;
  c.seed = 123456789012345ULL;
  c.mass = 0.7;
  const RunConfig back = nlohmann::json(c).get<RunConfig>();
  EXPECT_EQ(back, c);
  RunConfig none = c;
  none.reference.reset();
  EXPECT_EQ(nlohmann::json(none).get<RunConfig>(), none);
}

TEST(CliConfig, ShortestRoundTripFormatting) {
  EXPECT_EQ(cli::shortest(0.1), "0.1");
  EXPECT_EQ(cli::shortest(1e-300), "1e-300");
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int k = 0; k < 1000; ++k) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    EXPECT_EQ(std::stod(cli::shortest(v)), v);
  }
}

TEST(CliConfig, InlinePoints) {
  const auto p = cli::parse_points("0,0,0,0; 1.5,-2,3e-3,4");
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[1], (Point4{1.5, -2, 3e-3, 4}));
  EXPECT_THROW(cli::parse_points("0,0,0"), std::invalid_argument);
  EXPECT_THROW(cli::parse_points("0,0,0,0,0"), std::invalid_argument);
  EXPECT_THROW(cli::parse_points("0,x,0,0"), std::invalid_argument);
}
