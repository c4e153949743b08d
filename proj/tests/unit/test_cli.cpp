#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "cli.hpp"
#include "helpers.hpp"
#include "wendy/csv_io.hpp"
#include "wendy/estimator.hpp"
#include "wendy/models.hpp"

using namespace wendy;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("wendy_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  void write(const std::string& name, const std::string& text) const { write_text_file(path(name), text); }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, ModelsListJson) {
  const Outcome r = run({"models", "list", "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["schema_version"], 1);
  ASSERT_EQ(j["models"].size(), 5u);
  EXPECT_EQ(j["models"][0]["name"], "logistic");
  EXPECT_EQ(j["models"][4]["w_star"].size(), 11u);
  EXPECT_EQ(run({"models", "list"}).code, 0);
}

TEST_F(Cli, SimulateNoiselessEqualsTruth) {
  ASSERT_EQ(run({"simulate", "logistic", "512", "0.0", "-o", path("a.csv")}).code, 0);
  EXPECT_EQ(read_text_file(path("a.csv")), read_text_file(path("a.truth.csv")));
}

TEST_F(Cli, SimulateIsDeterministic) {
  ASSERT_EQ(run({"simulate", "lv", "256", "0.2", "--seed", "1", "-o", path("a.csv")}).code, 0);
  ASSERT_EQ(run({"simulate", "lv", "256", "0.2", "--seed", "1", "-o", path("b.csv")}).code, 0);
  EXPECT_EQ(read_text_file(path("a.csv")), read_text_file(path("b.csv")));
  EXPECT_NE(read_text_file(path("a.csv")), read_text_file(path("a.truth.csv")));
}

TEST_F(Cli, SimulateHeaderForFiveStates) {
  ASSERT_EQ(run({"simulate", "ptb", "64", "0.1", "-o", path("p.csv")}).code, 0);
  const std::string text = read_text_file(path("p.csv"));
  EXPECT_EQ(text.substr(0, text.find('\n')), "t,u1,u2,u3,u4,u5");
}

TEST_F(Cli, EstimateNoiselessLogistic) {
  ASSERT_EQ(run({"simulate", "logistic", "512", "0", "-o", path("a.csv")}).code, 0);
  const Outcome r = run({"estimate", path("a.csv"), "--model", "logistic"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_NEAR(j["w_hat"][0].get<double>(), 1.0, 1e-3);
  EXPECT_NEAR(j["w_hat"][1].get<double>(), -1.0, 1e-3);
  for (const char* key : {"stdx", "params", "sigma_hat", "n_iters", "stop_reason", "min_radius", "K"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["params"][0]["ci"].size(), 2u);
}

TEST_F(Cli, EstimateWithLibraryFile) {
  ASSERT_EQ(run({"simulate", "lv", "256", "0.05", "-o", path("a.csv")}).code, 0);
  write("lib.json", R"({"dim": 2, "equations": [["u1", "u1*u2"], ["u2", "u1*u2"]]})");
  const Outcome r = run({"estimate", path("a.csv"), "--library", path("lib.json"), "--out", path("fit.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(read_text_file(path("fit.json")));
  EXPECT_NEAR(j["w_hat"][0].get<double>(), 3.0, 0.3);
  EXPECT_FALSE(j.contains("E2"));
}

TEST_F(Cli, AlphaOneEqualsOls) {
  ASSERT_EQ(run({"simulate", "lv", "256", "0.2", "--seed", "4", "-o", path("a.csv")}).code, 0);
  const json a = json::parse(run({"estimate", path("a.csv"), "--model", "lv", "--alpha", "1.0"}).out);
  const json b = json::parse(run({"estimate", path("a.csv"), "--model", "lv", "--estimator", "ols"}).out);
  EXPECT_EQ(a["w_hat"], b["w_hat"]);
}

TEST_F(Cli, RoundTripMatchesInMemoryPipeline) {
  ASSERT_EQ(run({"simulate", "fhn", "256", "0.1", "--seed", "3", "-o", path("a.csv")}).code, 0);
  const json j = json::parse(run({"estimate", path("a.csv"), "--model", "fhn"}).out);
  const ModelSpec spec = catalog("fhn");
  const auto fit = estimate(add_noise(generate_truth(spec, 256), 0.1, 3), spec.lib);
  ASSERT_EQ(j["w_hat"].size(), static_cast<size_t>(fit.result.w_hat.size()));
  for (int i = 0; i < fit.result.w_hat.size(); ++i) EXPECT_EQ(j["w_hat"][i].get<double>(), fit.result.w_hat(i));
  EXPECT_EQ(j["sigma_hat"].get<double>(), fit.result.sigma_hat);
  EXPECT_EQ(j["K"].get<int>(), fit.basis.K);
}

TEST_F(Cli, NonUniformGridIsValidationError) {
  write("bad.csv", "t,u1\n0,1\n0.1,2\n0.25,3\n0.3,4\n");
  const Outcome r = run({"estimate", path("bad.csv"), "--model", "logistic"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("NonUniformGrid"), std::string::npos);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"simulate", "sir", "10", "0", "-o", path("x.csv")}).code, 2);
  EXPECT_EQ(run({"estimate", path("missing.csv"), "--model", "lv"}).code, 1);
  EXPECT_EQ(run({"estimate", path("missing.csv")}).code, 2);
  write("cfg.json", R"({"irls": {"tau": 1}})");
  const Outcome r = run({"benchmark", path("cfg.json"), "--out-dir", path("o")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("irls.tau"), std::string::npos);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(Cli, PrintConfigShowsResolvedDefaults) {
  const Outcome r = run({"estimate", "--print-config", "--alpha", "0.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["irls"]["alpha"], 0.5);
  EXPECT_EQ(j["irls"]["tau_fp"], 1e-6);
  EXPECT_EQ(j["test_functions"]["eta"], 9.0);
  const Outcome b = run({"benchmark", "--print-config", "--full-scale"});
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(json::parse(b.out)["experiment"]["n_trials"], 100);
}

TEST_F(Cli, BenchmarkWritesArtifactsDeterministically) {
  write("cfg.json", R"({"experiment": {"model": "logistic", "noise_ratios": [0.1], "n_trials": 1}})");
  ASSERT_EQ(run({"benchmark", path("cfg.json"), "--out-dir", path("o1"), "--jobs", "2"}).code, 0);
  ASSERT_EQ(run({"benchmark", path("cfg.json"), "--out-dir", path("o2"), "--jobs", "1"}).code, 0);
  for (const char* f : {"trials.csv", "summary.json", "long.csv"}) {
    EXPECT_GT(fs::file_size(dir_ / "o1" / f), 0u) << f;
  }
  EXPECT_EQ(read_text_file(path("o1/summary.json")), read_text_file(path("o2/summary.json")));
  const std::string lcsv = read_text_file(path("o1/long.csv"));
  EXPECT_EQ(lcsv.substr(0, lcsv.find('\n')), "model,M,sigma_nr,estimator,metric,value");
}

TEST_F(Cli, LotkaVolterraSweepHasPercentDrop) {
  write("cfg.json", R"({"experiment": {"model": "lv", "noise_ratios": [0.05, 0.2], "subsample_factors": [4, 8],
                        "n_trials": 2}})");
  ASSERT_EQ(run({"benchmark", path("cfg.json"), "--out-dir", path("o")}).code, 0);
  const json j = json::parse(read_text_file(path("o/summary.json")));
  ASSERT_EQ(j["cells"].size(), 8u);
  for (const auto& c : j["cells"]) {
    ASSERT_TRUE(c.contains("pct_drop_E2_vs_ols"));
    if (c["estimator"] == "wendy") EXPECT_TRUE(c["pct_drop_E2_vs_ols"].is_number());
  }
}

TEST_F(Cli, CompareTable) {
  const Outcome r = run({"compare", "--model", "lv", "--M", "256", "--noise", "0.1", "--trials", "2", "--out",
                     path("s.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("median_E2"), std::string::npos);
  EXPECT_NE(r.out.find("wendy"), std::string::npos);
  EXPECT_EQ(json::parse(read_text_file(path("s.json")))["cells"].size(), 2u);
  EXPECT_EQ(run({"compare", "--model", "lv", "--M", "300"}).code, 2);
}
