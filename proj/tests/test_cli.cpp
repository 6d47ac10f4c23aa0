#include "fieldrate/cli.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace fs = std::filesystem;
using fieldrate::cli::run;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Compares against tests/golden/<name>; FIELDRATE_UPDATE_GOLDEN=1 rewrites the file.
void check_golden(const std::string& name, const std::vector<std::string>& args) {
  const Result r = invoke(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const fs::path path = fs::path(FIELDRATE_GOLDEN_DIR) / name;
  if (std::getenv("FIELDRATE_UPDATE_GOLDEN")) {
    std::ofstream(path, std::ios::binary) << r.out;
    GTEST_SKIP() << "rewrote " << path;
  }
  ASSERT_TRUE(fs::exists(path)) << "missing golden file " << path;
  EXPECT_EQ(r.out, slurp(path));
}

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("fieldrate_cli_" + name); }

}  // namespace

// ---------------------------------------------------------------------------
// Golden outputs (stable schemas)
// ---------------------------------------------------------------------------

TEST(CliGolden, PmaxCurve) {
  check_golden("pmax_curve_exp.csv", {"pmax-curve", "--model", "exp", "--n", "2,16,32,64"});
}

TEST(CliGolden, RatesBits) {
  check_golden("rates_sinc_bits.csv", {"rates", "--model", "sinc", "--n-range", "32:128:x2", "--units", "bits"});
}

TEST(CliGolden, RatesJson) {
  check_golden("rates_exp.json", {"rates", "--model", "exp", "--n", "1,64", "--format", "json"});
}

TEST(CliGolden, P2p) { check_golden("p2p_sinc.json", {"p2p", "--model", "sinc", "--n", "7,70"}); }

TEST(CliGolden, P2pScan) {
  check_golden("p2p_exp_scan.csv", {"p2p", "--model", "exp", "--k-max", "30", "--format", "csv"});
}

TEST(CliGolden, SimulateP2p) {
  check_golden("simulate_p2p.json",
               {"simulate", "--scheme", "p2p", "--model", "exp", "--n", "48", "--k", "24", "--m-prime", "50"});
}

TEST(CliGolden, SimulateDsc) {
  check_golden("simulate_dsc.csv",
               {"simulate", "--model", "sinc", "--n", "6", "--p", "0.3", "--m", "300", "--format", "csv"});
}

// ---------------------------------------------------------------------------
// Behaviour
// ---------------------------------------------------------------------------

TEST(Cli, P2pHeadline) {
  for (const auto& [model, k, rate] : {std::tuple{"sinc", 7, 11.77}, std::tuple{"exp", 24, 46.92}}) {
    const Result r = invoke({"p2p", "--model", model});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["k_star"], k);
    EXPECT_NEAR(j["sum_rate"].get<double>(), rate, 0.02);
    EXPECT_LT(j["quantizer"]["delta_bits"].get<double>(), 1.0);
    EXPECT_LE(j["quantizer"]["distortion"].get<double>(), j["sample_distortion"].get<double>());
  }
}

TEST(Cli, PmaxRatiosAndMonotone) {
  const Result sinc = invoke({"pmax-curve", "--model", "sinc", "--n", "64,128,256", "--format", "json"});
  ASSERT_EQ(sinc.code, 0);
  const auto sinc_rows = nlohmann::json::parse(sinc.out)["rows"];
  std::vector<double> ratio;
  for (const auto& row : sinc_rows) ratio.push_back(row["p_max_over_n"]);
  const auto [lo, hi] = std::minmax_element(ratio.begin(), ratio.end());
  EXPECT_LE(*hi / *lo, 1.3 / 0.7);
  for (double v : ratio) EXPECT_LE(std::abs(v / ratio.front() - 1.0), 0.3);

  const Result exp = invoke({"pmax-curve", "--model", "exp", "--n", "64,128,256", "--format", "json"});
  const auto exp_rows = nlohmann::json::parse(exp.out)["rows"];
  double prev = 0.0;
  for (const auto& row : exp_rows) {
    EXPECT_GT(row["p_max"].get<double>(), prev);
    prev = row["p_max"];
  }
}

TEST(Cli, RatesOrderedAndBitsConversion) {
  const Result nats = invoke({"rates", "--model", "sinc", "--n-range", "50:500:150", "--format", "json"});
  const Result bits =
      invoke({"rates", "--model", "sinc", "--n-range", "50:500:150", "--format", "json", "--units", "bits"});
  ASSERT_EQ(nats.code, 0);
  const auto jn = nlohmann::json::parse(nats.out)["rows"];
  const auto jb = nlohmann::json::parse(bits.out)["rows"];
  ASSERT_EQ(jn.size(), 4u);
  for (std::size_t i = 0; i < jn.size(); ++i) {
    EXPECT_LE(jn[i]["centralized_rate"].get<double>(), jn[i]["dsc_rate"].get<double>());
    EXPECT_NEAR(jb[i]["dsc_rate"].get<double>(), jn[i]["dsc_rate"].get<double>() / std::numbers::ln2, 1e-12);
  }
}

TEST(Cli, SimulateDefaults) {
  const Result dsc = invoke({"simulate", "--model", "exp", "--n", "64"});
  ASSERT_EQ(dsc.code, 0) << dsc.err;
  EXPECT_EQ(nlohmann::json::parse(dsc.out)["report"]["verdict"], "within");

  const Result p2p = invoke({"simulate", "--scheme", "p2p", "--model", "exp", "--n", "48", "--k", "24"});
  ASSERT_EQ(p2p.code, 0) << p2p.err;
  const auto rep = nlohmann::json::parse(p2p.out)["report"];
  EXPECT_LE(rep["j_mse"].get<double>(), 0.1 + 3.0 * rep["stderr_jmse"].get<double>());
}

TEST(Cli, OutputFileIsByteIdenticalOnRerun) {
  const fs::path a = temp_file("a.json"), b = temp_file("b.json");
  const std::vector<std::string> base{"simulate", "--scheme", "p2p", "--model", "sinc", "--n", "14", "--m-prime", "100"};
  auto with_out = [&](const fs::path& p) {
    auto args = base;
    args.insert(args.end(), {"--out", p.string()});
    return invoke(args);
  };
  ASSERT_EQ(with_out(a).code, 0);
  ASSERT_EQ(with_out(b).code, 0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_FALSE(slurp(a).empty());
  fs::remove(a);
  fs::remove(b);
}

TEST(Cli, QuantizerFileAndLog) {
  const fs::path q = temp_file("q.json"), log = temp_file("log.csv");
  fs::remove(log);
  std::ofstream(q) << R"({"levels":2,"boundaries":[0.0],"points":[-0.7978845608028654,0.7978845608028654],"distortion":0.36338022763241865})";
  const Result r = invoke({"simulate", "--scheme", "p2p", "--model", "exp", "--n", "48", "--k", "24", "--m-prime", "30",
                           "--quantizer", q.string(), "--log", log.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["config"]["levels"], 2);
  EXPECT_NE(slurp(log).find("p2p-lloyd"), std::string::npos);
  fs::remove(q);
  fs::remove(log);
}

TEST(Cli, ConfigEmbedded) {
  const Result r = invoke({"pmax-curve", "--model", "exp", "--n", "64", "--dnet", "0.2"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("# config: ", 0), 0u);
  EXPECT_NE(r.out.find("\"dnet\":0.2"), std::string::npos);
}

// ---------------------------------------------------------------------------
// Exit codes
// ---------------------------------------------------------------------------

TEST(CliExit, Usage) {
  EXPECT_EQ(invoke({}).code, 2);
  EXPECT_EQ(invoke({"bogus"}).code, 2);
  EXPECT_EQ(invoke({"pmax-curve", "--model", "exp"}).code, 2);
  EXPECT_EQ(invoke({"pmax-curve", "--model", "gauss", "--n", "4"}).code, 2);
  EXPECT_EQ(invoke({"pmax-curve", "--model", "table:/nonexistent.csv", "--n", "4"}).code, 2);
  EXPECT_EQ(invoke({"rates", "--n", "4", "--dnet", "1.5"}).code, 2);
  EXPECT_EQ(invoke({"rates", "--n", "4", "--units", "furlongs"}).code, 2);
  EXPECT_EQ(invoke({"rates", "--n-range", "10:5:1"}).code, 2);
  EXPECT_EQ(invoke({"rates", "--n", "0"}).code, 2);
  EXPECT_EQ(invoke({"simulate", "--scheme", "p2p", "--n", "10", "--k", "3"}).code, 2);
  EXPECT_EQ(invoke({"simulate", "--n", "20", "--naive"}).code, 2);
  EXPECT_EQ(invoke({"--help"}).code, 0);
}

TEST(CliExit, Infeasible) {
  const Result r = invoke({"simulate", "--model", "exp", "--n", "1"});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("smallest feasible"), std::string::npos);
  EXPECT_EQ(invoke({"p2p", "--model", "exp", "--k-max", "5"}).code, 3);
}

TEST(CliExit, BoundViolation) {
  // rho dips to 0 inside the half gap, outside the sandwich's hypotheses.
  const fs::path t = temp_file("dip.csv");
  std::ofstream(t) << "tau,rho\n0,1\n0.05,0\n0.1,1\n1,1\n";
  const Result r = invoke({"simulate", "--model", "table:" + t.string(), "--n", "5", "--p", "0.1", "--m", "500"});
  EXPECT_EQ(r.code, 4);
  EXPECT_EQ(nlohmann::json::parse(r.out)["report"]["verdict"], "violated-high");
  EXPECT_EQ(nlohmann::json::parse(r.out)["report"]["bounds_applicable"], false);
  fs::remove(t);
}
