#include "memsde/config.hpp"
#include "memsde/ensemble_io.hpp"
#include "memsde/error.hpp"
#include "memsde/report_io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

using namespace memsde;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("memsde_test_" + name);
  fs::remove_all(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Ensemble sample_ensemble() {
  Ensemble e;
  e.samples.resize(3, 2);
  e.samples << 0.1, -2.5e-17, 1.0 / 3.0, 1e300, std::numeric_limits<double>::infinity(), 0.0;
  e.diverged = {std::nullopt, std::nullopt, 7};
  return e;
}

std::string expect_config_error(const std::string& text) {
  try {
    parse_config(text, "cfg.json");
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ConfigError);
    return e.what();
  }
  ADD_FAILURE() << "accepted: " << text;
  return {};
}

}  // namespace

TEST(Json, SeventeenDigitsAndNull) {
  Json j;
  j["third"] = 1.0 / 3.0;
  j["nan"] = std::nan("");
  j["inf"] = std::numeric_limits<double>::infinity();
  j["n"] = 3;
  j["s"] = "a\"b";
  const std::string out = dump_json(j);
  EXPECT_NE(out.find("0.33333333333333331"), std::string::npos);
  EXPECT_NE(out.find("\"nan\": null"), std::string::npos);
  EXPECT_NE(out.find("\"inf\": null"), std::string::npos);
  EXPECT_NE(out.find("\"n\": 3"), std::string::npos);
  EXPECT_NE(out.find("\"a\\\"b\""), std::string::npos);
  EXPECT_EQ(out.back(), '\n');
  // Keys keep insertion order.
  EXPECT_LT(out.find("third"), out.find("nan"));
  const Json back = Json::parse(out);
  EXPECT_EQ(back["third"].get<double>(), 1.0 / 3.0);
}

TEST(Csv, FormatsAndTables) {
  EXPECT_EQ(format_double(std::nan("")), "nan");
  EXPECT_EQ(format_double(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(std::stod(format_double(0.1)), 0.1);
  const auto t = errors_table({0.5, 0.25}, {1.0, 0.5}, {0.1, 0.05}, {10, 20});
  EXPECT_EQ(t.to_string().substr(0, t.to_string().find('\n')), "tau,w1,se,n_effective");
  const std::string rates = rates_csv(RateFit{1.0, 0.0, 0.0}, std::nullopt);
  EXPECT_EQ(rates, "model,slope,intercept,residual\nlogtau,1,0,0\n");
}

TEST(EnsembleIo, CsvRoundTripIsExact) {
  const auto e = sample_ensemble();
  const auto back = ensemble_from_csv(ensemble_to_csv(e));
  ASSERT_EQ(back.size(), 3u);
  for (Eigen::Index i = 0; i < 2; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) EXPECT_EQ(back.samples(i, j), e.samples(i, j));
  EXPECT_EQ(back.diverged, e.diverged);
  EXPECT_EQ(ensemble_to_csv(e).substr(0, 25), "id,diverged_step,x_1,x_2\n");
}

TEST(EnsembleIo, BinaryRoundTripIsExact) {
  const auto e = sample_ensemble();
  const std::string bytes = ensemble_to_binary(e);
  EXPECT_EQ(bytes.substr(0, 4), "MEM1");
  EXPECT_EQ(bytes.size(), 4u + 16u + 6u * 8u);
  const auto back = ensemble_from_binary(bytes);
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) EXPECT_EQ(back.samples(i, j), e.samples(i, j));
  EXPECT_FALSE(back.diverged[0].has_value());
  ASSERT_TRUE(back.diverged[2].has_value());
  EXPECT_THROW(ensemble_from_binary("MEM0"), Error);
}

TEST(EnsembleIo, FileRoundTrip) {
  const auto dir = fresh_dir("ensemble");
  fs::create_directories(dir);
  const auto e = sample_ensemble();
  write_ensemble_csv(dir / "e.csv", e);
  write_ensemble_binary(dir / "e.bin", e);
  EXPECT_EQ(read_ensemble_csv(dir / "e.csv").diverged, e.diverged);
  EXPECT_EQ(read_ensemble_binary(dir / "e.bin").samples(1, 1), 1e300);
  EXPECT_THROW(read_ensemble_csv(dir / "missing.csv"), Error);
}

TEST(OutputDirTest, ManifestListsEveryFile) {
  const auto dir = fresh_dir("manifest");
  OutputDir out(dir);
  out.write("a.txt", "hello\n");
  out.write_json("report.json", Json{{"x", 1}});
  out.write_csv("t.csv", CsvTable{{"a"}, {{1.0}}});
  Json cfg;
  cfg["seed"] = 5;
  out.finish(cfg);
  const Json m = Json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(m["schema"], kSchemaVersion);
  EXPECT_EQ(m["config"]["seed"], 5);
  std::vector<std::string> listed = m["files"].get<std::vector<std::string>>();
  std::vector<std::string> present;
  for (const auto& f : fs::directory_iterator(dir)) present.push_back(f.path().filename().string());
  std::sort(listed.begin(), listed.end());
  std::sort(present.begin(), present.end());
  EXPECT_EQ(listed, present);
  EXPECT_FALSE(fs::exists(dir / "a.txt.tmp"));
}

TEST(Config, ParsesValidConfig) {
  const auto cfg = parse_config(R"({
  "schema": "mem-sde/1",
  "problem": {"name": "double_well", "params": {"d": 2}},
  "scheme": {"kind": "pem"},
  "x0": {"point": 1.5},
  "seed": 9,
  "weak-rate": {"T": 1, "taus": [0.25, 0.125, 0.0625], "M": 100}
})");
  const auto p = problem_from_config(cfg);
  EXPECT_EQ(p.d(), 2u);
  EXPECT_EQ(scheme_from_config(cfg, p).kind(), SchemeKind::PEM);
  const auto x0 = x0_from_config(cfg, p);
  EXPECT_EQ(x0.mean()(1), 1.5);
  EXPECT_EQ(context_from_config(cfg).seed, 9u);
  const auto wp = weak_params_from_config(cfg, p);
  EXPECT_EQ(wp.taus.size(), 3u);
  EXPECT_EQ(wp.M, 100u);
}

TEST(Config, MalformedJsonReportsLineAndColumn) {
  const std::string msg = expect_config_error("{\n  \"schema\": \"mem-sde/1\",\n  \"seed\": ,\n}");
  EXPECT_NE(msg.find("cfg.json:3:"), std::string::npos) << msg;
}

TEST(Config, UnknownKeysReportLocation) {
  const std::string msg = expect_config_error("{\n  \"schema\": \"mem-sde/1\",\n  \"sed\": 1\n}");
  EXPECT_NE(msg.find("cfg.json:3:3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("sed"), std::string::npos);
}

TEST(Config, WrongSchemaRejected) {
  expect_config_error(R"({"schema": "mem-sde/2"})");
  expect_config_error("[1, 2]");
}

TEST(Config, SectionKeysAreChecked) {
  const auto cfg = parse_config(R"({"schema": "mem-sde/1", "problem": {"name": "double_well"},
    "moments": {"tau": 0.1, "N": 10, "M": 10, "order": [2]}})");
  EXPECT_THROW(moment_params_from_config(cfg), Error);
  const auto bad = parse_config(R"({"schema": "mem-sde/1", "problem": {"name": "nope"}})");
  try {
    problem_from_config(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ConfigError);
  }
  const auto custom = parse_config(R"({"schema": "mem-sde/1", "problem": {"name": "double_well"},
    "scheme": {"kind": "custom"}})");
  EXPECT_THROW(scheme_from_config(custom, problem_from_config(custom)), Error);
}

TEST(Config, TestFunctions) {
  Vec x(2);
  x << 3.0, -4.0;
  EXPECT_EQ((*parse_test_function("first_coordinate"))(x), 3.0);
  EXPECT_EQ((*parse_test_function("sum"))(x), -1.0);
  EXPECT_EQ((*parse_test_function("norm"))(x), 5.0);
  EXPECT_EQ((*parse_test_function("constant"))(x), 1.0);
  EXPECT_FALSE(parse_test_function("cosine").has_value());
}

TEST(Config, ShippedConfigsBuild) {
  std::size_t n = 0;
  for (const auto& f : fs::directory_iterator(MEMSDE_CONFIG_DIR)) {
    if (f.path().extension() != ".json") continue;
    ++n;
    SCOPED_TRACE(f.path().filename().string());
    const auto cfg = load_config(f.path());
    const auto p = problem_from_config(cfg);
    scheme_from_config(cfg, p);
    x0_from_config(cfg, p);
    context_from_config(cfg);
    const auto& j = cfg.json;
    if (j.contains("simulate")) simulate_params_from_config(cfg);
    if (j.contains("check")) check_params_from_config(cfg);
    if (j.contains("weak-rate")) weak_params_from_config(cfg, p);
    if (j.contains("invariant")) invariant_params_from_config(cfg);
    if (j.contains("moments")) moment_params_from_config(cfg);
    if (j.contains("blowup")) blowup_params_from_config(cfg);
    if (j.contains("contraction")) contraction_params_from_config(cfg, p);
    if (j.contains("bel-grad")) bel_params_from_config(cfg, p);
  }
  EXPECT_GE(n, 8u);
}
