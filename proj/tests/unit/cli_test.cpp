#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "hetadmit/serialize.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "hetadmit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = hetadmit::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("hetadmit_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
            "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    write("fleet.toml", R"(seed = 7

[slo]
max_latency_s = 2.0

[[device]]
name = "v100"
kind = "gpu"
alpha = 0.018
beta = 0.27

[[device]]
name = "xeon"
kind = "cpu"
alpha = 0.084
beta = 0.32
noise_stddev = 0.01

[plan]
accelerator_depth = 96
cpu_depth = 22
heterogeneous = true
)");
    write("workload.toml", "[workload]\nmode = \"closed_loop\"\nconcurrency = 118\nbatches = 10\n");
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  void write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name) << text;
  }
  static std::string slurp(const std::string& p) { return hetadmit::read_file(p); }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, EstimatePrintsDepth) {
  auto r = run({"estimate", "--alpha", "0.018", "--beta", "0.27", "--slo", "1"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "40\n");
  r = run({"estimate", "--alpha", "0.009", "--beta", "0.24", "--slo", "2"});
  EXPECT_EQ(r.out, "195\n");
}

TEST_F(CliTest, EstimateFleetPlan) {
  const auto r = run({"estimate", "--config", path("fleet.toml")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("accelerator_depth"), 96);
  EXPECT_EQ(j.at("cpu_depth"), 20);
}

TEST_F(CliTest, CostReportsSavings) {
  const auto r = run({"cost", "--c-cpu", "22", "--c-accel", "96"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("peak savings:    18.6%"), std::string::npos);
  EXPECT_NE(r.out.find("throughput gain: 22.9%"), std::string::npos);
}

TEST_F(CliTest, CostWithInputs) {
  const auto r = run({"cost", "--c-cpu", "22", "--c-accel", "96", "--qps", "1000", "--peak",
                      "1180", "--throughput", "100", "--max-concurrency", "118", "--price", "10",
                      "--slo", "2", "--t-proc", "0.5", "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_DOUBLE_EQ(j.at("peak_strategy_cost").get<double>(), 100.0);
  EXPECT_EQ(j.at("waiting_slots"), 3);
  EXPECT_EQ(run({"cost", "--c-cpu", "1", "--c-accel", "2", "--qps", "5"}).code, 2);
}

TEST_F(CliTest, UnknownSubcommandIsUsageError) {
  const auto r = run({"frobnicate"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run({}).code, 2);
}

TEST_F(CliTest, RuntimeErrorsExitOne) {
  const auto r = run({"stress", "--alpha", "0.5", "--beta", "1.5", "--slo", "1", "--step", "1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("DeviceInfeasible"), std::string::npos);
  EXPECT_EQ(run({"simulate", "--config", path("missing.toml"), "--workload",
                 path("workload.toml")})
                .code,
            1);
}

TEST_F(CliTest, StressPrintsDepth) {
  const auto r = run({"stress", "--alpha", "0.018", "--beta", "0.27", "--slo", "1", "--step", "8"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "40\n");
}

TEST_F(CliTest, SimulateIsDeterministic) {
  for (const char* name : {"a.json", "b.json"}) {
    const auto r = run({"simulate", "--config", path("fleet.toml"), "--workload",
                        path("workload.toml"), "--seed", "3", "--out", path(name)});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
  const auto m = nlohmann::json::parse(slurp(path("a.json"))).get<hetadmit::SimMetrics>();
  EXPECT_EQ(m.submitted(), 1180u);
  EXPECT_GT(m.accepted_cpu, 0u);
}

TEST_F(CliTest, SimulateWritesDecisions) {
  const auto r = run({"simulate", "--config", path("fleet.toml"), "--workload",
                      path("workload.toml"), "--out", path("m.json"), "--decisions",
                      path("d.jsonl")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(path("d.jsonl"));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    hetadmit::decision_from_jsonl(line);
    ++n;
  }
  EXPECT_EQ(n, 1180u);
}

TEST_F(CliTest, CalibrateFromCsvThenEstimate) {
  write("profile.csv", "concurrency,latency_s\n8,0.414\n16,0.558\n32,0.846\n64,1.422\n");
  auto r = run({"calibrate", "--csv", path("profile.csv"), "--out", path("fit.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  r = run({"estimate", "--fit", path("fit.json"), "--slo", "2"});
  EXPECT_EQ(r.out, "96\n");
}

TEST_F(CliTest, CalibrateSimulatedDevice) {
  const auto r =
      run({"calibrate", "--config", path("fleet.toml"), "--device", "v100", "--seed", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(j.at("alpha").get<double>(), 0.018, 1e-12);
}

TEST_F(CliTest, FinetuneOutput) {
  write("v1.toml", R"(
[slo]
max_latency_s = 1
[[device]]
name = "v100"
kind = "gpu"
alpha = 0.018
beta = 0.27
[[device]]
name = "xeon"
kind = "cpu"
alpha = 0.084
beta = 0.32
plan = "auto"
)");
  const auto r = run({"finetune", "--config", path("v1.toml"), "--radius", "4",
                      "--accelerator-offset", "-0.07"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("accelerator_depth"), 44);
  EXPECT_EQ(j.at("cpu_depth"), 8);
  EXPECT_EQ(j.at("initial").at("accelerator_depth"), 40);
}

TEST_F(CliTest, AffinityText) {
  const auto r = run({"affinity", "--cores", "128", "--numa", "4", "--reserve", "0.25"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("numa 3: 127-96"), std::string::npos);
  EXPECT_NE(r.out.find("numa 1: 63-32"), std::string::npos);
}

TEST_F(CliTest, ReportRendersRunDirectory) {
  fs::create_directories(dir_ / "run");
  const auto run_dir = (dir_ / "run").string();
  ASSERT_EQ(run({"estimate", "--config", path("fleet.toml"), "--out", run_dir + "/plan.json"}).code,
            0);
  ASSERT_EQ(run({"simulate", "--config", path("fleet.toml"), "--workload", path("workload.toml"),
                 "--out", run_dir + "/metrics.json"})
                .code,
            0);
  ASSERT_EQ(run({"cost", "--c-cpu", "22", "--c-accel", "96", "--out", run_dir + "/cost.json"}).code,
            0);
  auto r = run({"report", "--run-dir", run_dir});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("## Queue depths"), std::string::npos);
  EXPECT_NE(r.out.find("| linear_regression | 2.00 | 96 | 20 | true |"), std::string::npos);
  EXPECT_NE(r.out.find("## Simulated service"), std::string::npos);
  EXPECT_NE(r.out.find("18.6%"), std::string::npos);

  std::ofstream(dir_ / "run" / "broken.json") << "{not json";
  r = run({"report", "--run-dir", run_dir});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("## Unreadable files"), std::string::npos);
}
