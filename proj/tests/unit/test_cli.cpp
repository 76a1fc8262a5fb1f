#include "memsde_cli/cli.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using memsde::cli::run;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("memsde_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path write_config(const fs::path& dir, const std::string& body) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << body;
  return p;
}

int invoke(std::vector<std::string> args, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  if (err_text) *err_text = err.str();
  return code;
}

const char* kSmall = R"({
  "schema": "mem-sde/1",
  "problem": {"name": "double_well", "params": {"d": 1}},
  "scheme": {"kind": "tem"},
  "x0": {"point": 0.5},
  "seed": 3,
  "simulate": {"tau": 0.05, "T": 1, "M": 300, "binary": true},
  "check": {"n_points": 500, "radius": 5},
  "weak-rate": {"T": 1, "taus": [0.25, 0.125, 0.0625], "M": 300, "ref_refinement": 4},
  "invariant": {"taus": [0.25, 0.125], "N_long": 256, "M": 300, "ref_refinement": 2},
  "moments": {"tau": 0.1, "N": 50, "M": 300, "orders": [2, 4]},
  "blowup": {"tau": 0.5, "N": 20, "M": 100},
  "contraction": {"x0_a": 1, "x0_b": -1, "tau": 0.05, "T_list": [0.5, 1, 1.5, 2], "M": 300},
  "bel-grad": {"t": 1, "x": 0.5, "v": 1, "tau": 0.03125, "M": 300, "phi": "first_coordinate", "fd_h": 0.01}
})";

}  // namespace

TEST(Cli, EveryCommandSucceedsAndWritesManifest) {
  const auto dir = scratch("all");
  const auto cfg = write_config(dir, kSmall);
  const std::vector<std::pair<std::string, std::string>> commands{
      {"simulate", "ensemble.csv"}, {"check", "checks.csv"},     {"weak-rate", "errors.csv"},
      {"invariant", "rates.csv"},   {"moments", "moments.csv"}, {"blowup", "blowup.csv"},
      {"contraction", "contraction.csv"}, {"bel-grad", "gradient.csv"}};
  for (const auto& [cmd, artifact] : commands) {
    const fs::path out = dir / cmd;
    std::string err;
    ASSERT_EQ(invoke({cmd, "--config", cfg.string(), "--out", out.string()}, &err), 0) << cmd << ": " << err;
    EXPECT_TRUE(fs::exists(out / "report.json")) << cmd;
    EXPECT_TRUE(fs::exists(out / artifact)) << cmd;
    const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
    std::size_t present = 0;
    for ([[maybe_unused]] const auto& f : fs::directory_iterator(out)) ++present;
    EXPECT_EQ(manifest["files"].size(), present) << cmd;
    EXPECT_EQ(manifest["config"]["seed"], 3) << cmd;
  }
  EXPECT_TRUE(fs::exists(dir / "simulate" / "ensemble.bin"));
}

TEST(Cli, OverridesAreRecordedInManifest) {
  const auto dir = scratch("override");
  const auto cfg = write_config(dir, kSmall);
  ASSERT_EQ(invoke({"simulate", "--config", cfg.string(), "--out", (dir / "o").string(), "--seed", "11",
                    "--workers", "2"}),
            0);
  const auto manifest = nlohmann::json::parse(slurp(dir / "o" / "manifest.json"));
  EXPECT_EQ(manifest["config"]["seed"], 11);
  EXPECT_EQ(manifest["config"]["workers"], 2);
}

TEST(Cli, ReportsAreByteIdenticalAcrossRunsAndWorkers) {
  const auto dir = scratch("repro");
  const auto cfg = write_config(dir, kSmall);
  const std::vector<std::pair<std::string, std::string>> runs{{"a", "1"}, {"b", "1"}, {"c", "3"}};
  for (const auto& [name, w] : runs)
    ASSERT_EQ(invoke({"weak-rate", "--config", cfg.string(), "--out", (dir / name).string(), "--workers", w}), 0);
  EXPECT_EQ(slurp(dir / "a" / "report.json"), slurp(dir / "b" / "report.json"));
  EXPECT_EQ(slurp(dir / "a" / "errors.csv"), slurp(dir / "c" / "errors.csv"));
  EXPECT_EQ(slurp(dir / "a" / "rates.csv"), slurp(dir / "c" / "rates.csv"));
  const auto ja = nlohmann::json::parse(slurp(dir / "a" / "report.json"));
  const auto jc = nlohmann::json::parse(slurp(dir / "c" / "report.json"));
  EXPECT_EQ(ja["report"], jc["report"]);
}

TEST(Cli, ConfigErrorsExitTwo) {
  const auto dir = scratch("errors");
  std::string err;
  EXPECT_EQ(invoke({}), 2);
  EXPECT_EQ(invoke({"simulate", "--out", dir.string()}), 2);
  EXPECT_EQ(invoke({"frobnicate", "--config", "x.json", "--out", dir.string()}), 2);
  EXPECT_EQ(invoke({"simulate", "--config", (dir / "missing.json").string(), "--out", (dir / "o").string()}), 2);
  const auto bad = write_config(dir, "{\n  \"schema\": \"mem-sde/1\",\n  \"problem\": {\"name\": \"double_well\"},\n  \"bogus\": 1\n}");
  EXPECT_EQ(invoke({"simulate", "--config", bad.string(), "--out", (dir / "o").string()}, &err), 2);
  EXPECT_NE(err.find(":4:3"), std::string::npos) << err;
}

TEST(Cli, RuntimeErrorsExitThree) {
  const auto dir = scratch("runtime");
  // Explicit Euler from far out diverges in the reference run.
  const auto cfg = write_config(dir, R"({
  "schema": "mem-sde/1",
  "problem": {"name": "double_well"},
  "scheme": {"kind": "em"},
  "x0": {"point": 20},
  "weak-rate": {"T": 1, "taus": [0.5, 0.25, 0.125], "M": 50, "ref_refinement": 2}
})");
  std::string err;
  EXPECT_EQ(invoke({"weak-rate", "--config", cfg.string(), "--out", (dir / "o").string()}, &err), 3);
  EXPECT_NE(err.find("DivergenceInReference"), std::string::npos) << err;
}

TEST(Cli, ShippedConfigsParse) {
  const auto dir = scratch("shipped");
  std::string err;
  EXPECT_EQ(invoke({"check", "--config", std::string(MEMSDE_CONFIG_DIR) + "/double_well_check.json", "--out",
                    (dir / "o").string()},
                   &err),
            0)
      << err;
}
