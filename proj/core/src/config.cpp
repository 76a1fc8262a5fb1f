#include "memsde/config.hpp"

#include "memsde/error.hpp"
#include "memsde/report_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace memsde {

namespace {

std::string line_col(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < offset; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return std::to_string(line) + ":" + std::to_string(col);
}


}  // namespace

ConfigFile parse_config(std::string text, std::string source) {
  ConfigFile cfg{Json(), std::move(text), std::move(source)};
  try {
    cfg.json = Json::parse(cfg.text);
  } catch (const nlohmann::json::parse_error& e) {
    // byte is 1-based and points just past the offending character.
    const std::size_t at = e.byte > 0 ? e.byte - 1 : 0;
    std::string what = e.what();
    const auto pos = what.find("parse error");
    if (pos != std::string::npos) what = what.substr(pos);
    fail(Errc::ConfigError, cfg.source + ":" + line_col(cfg.text, at) + ": invalid JSON: " + what);
  }
  if (!cfg.json.is_object()) fail(Errc::ConfigError, cfg.source + ":1:1: config must be a JSON object");
  const ConfigSection root = root_section(cfg);
  root.only({"schema", "problem", "scheme", "x0", "seed", "workers", "simulate", "check", "weak-rate",
             "invariant", "moments", "blowup", "contraction", "bel-grad"});
  if (!root.has("schema")) fail(Errc::ConfigError, cfg.source + ":1:1: missing \"schema\": \"mem-sde/1\"");
  if (root.string("schema", "") != kSchemaVersion)
    root.fail_at("schema", std::string("unsupported schema; expected \"") + kSchemaVersion + "\"");
  return cfg;
}

ConfigFile load_config(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(Errc::ConfigError, path.string() + ": cannot read config file");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string locate(const ConfigFile& cfg, std::string_view key) {
  const std::string needle = "\"" + std::string(key) + "\"";
  const auto pos = cfg.text.find(needle);
  if (pos == std::string::npos) return cfg.source;
  return cfg.source + ":" + line_col(cfg.text, pos);
}

// ---------------------------------------------------------------------------------------

ConfigSection::ConfigSection(const ConfigFile& cfg, const Json* object, std::string name)
    : cfg_(&cfg), object_(object), name_(std::move(name)) {
  if (object_ && !object_->is_object()) fail(Errc::ConfigError, locate(cfg, name_) + ": \"" + name_ + "\" must be an object");
}

ConfigSection root_section(const ConfigFile& cfg) { return ConfigSection(cfg, &cfg.json, ""); }

void ConfigSection::fail_at(std::string_view key, const std::string& message) const {
  const std::string where = name_.empty() ? std::string(key) : name_ + "." + std::string(key);
  fail(Errc::ConfigError, locate(*cfg_, key) + ": " + where + ": " + message);
}

bool ConfigSection::has(std::string_view key) const {
  return object_ && object_->contains(std::string(key));
}

const Json& ConfigSection::at(std::string_view key) const {
  if (!has(key)) {
    const std::string where = name_.empty() ? std::string(key) : name_ + "." + std::string(key);
    fail(Errc::ConfigError, locate(*cfg_, name_.empty() ? key : std::string_view(name_)) + ": missing required key " + where);
  }
  return (*object_)[std::string(key)];
}

void ConfigSection::only(std::initializer_list<std::string_view> allowed) const {
  if (!object_) return;
  for (auto it = object_->begin(); it != object_->end(); ++it)
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) fail_at(it.key(), "unknown key");
}

double ConfigSection::number(std::string_view key) const {
  const Json& v = at(key);
  if (!v.is_number()) fail_at(key, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail_at(key, "expected a finite number");
  return x;
}

double ConfigSection::number(std::string_view key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

std::int64_t ConfigSection::integer(std::string_view key) const {
  const Json& v = at(key);
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    const double x = v.get<double>();
    if (std::isfinite(x) && x == std::floor(x) && std::abs(x) < 9e15) return static_cast<std::int64_t>(x);
  }
  fail_at(key, "expected an integer");
}

std::int64_t ConfigSection::integer(std::string_view key, std::int64_t fallback) const {
  return has(key) ? integer(key) : fallback;
}

std::size_t ConfigSection::count(std::string_view key, std::size_t fallback) const {
  if (!has(key)) return fallback;
  const std::int64_t v = integer(key);
  if (v < 0) fail_at(key, "expected a non-negative integer");
  return static_cast<std::size_t>(v);
}

bool ConfigSection::boolean(std::string_view key, bool fallback) const {
  if (!has(key)) return fallback;
  const Json& v = at(key);
  if (!v.is_boolean()) fail_at(key, "expected true or false");
  return v.get<bool>();
}

std::string ConfigSection::string(std::string_view key, std::string fallback) const {
  if (!has(key)) return fallback;
  const Json& v = at(key);
  if (!v.is_string()) fail_at(key, "expected a string");
  return v.get<std::string>();
}

std::vector<double> ConfigSection::numbers(std::string_view key) const {
  const Json& v = at(key);
  if (!v.is_array()) fail_at(key, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number() || !std::isfinite(e.get<double>())) fail_at(key, "expected an array of finite numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

Vec ConfigSection::vector(std::string_view key, std::size_t d) const {
  const Json& v = at(key);
  if (v.is_number()) return Vec::Constant(static_cast<Eigen::Index>(d), number(key));
  const auto xs = numbers(key);
  if (xs.size() != d) fail_at(key, "expected " + std::to_string(d) + " components");
  return Eigen::Map<const Vec>(xs.data(), static_cast<Eigen::Index>(d));
}

ConfigSection ConfigSection::section(std::string_view key) const {
  return ConfigSection(*cfg_, has(key) ? &(*object_)[std::string(key)] : nullptr, std::string(key));
}

ParamMap ConfigSection::params(std::string_view key) const {
  ParamMap out;
  const ConfigSection s = section(key);
  if (!s.present()) return out;
  for (auto it = s.object_->begin(); it != s.object_->end(); ++it) out[it.key()] = s.number(it.key());
  return out;
}

// ---------------------------------------------------------------------------------------

SdeProblem problem_from_config(const ConfigFile& cfg) {
  const ConfigSection root = root_section(cfg);
  const ConfigSection s = root.section("problem");
  if (!s.present()) fail(Errc::ConfigError, cfg.source + ":1:1: missing required key problem");
  s.only({"name", "params", "constants"});
  const std::string name = s.string("name", "");
  if (name.empty()) s.fail_at("name", "problem name is required");
  if (!parse_builtin(name)) s.fail_at("name", "unknown problem '" + name + "'");
  try {
    return make_builtin(name, s.params("params"), s.params("constants"));
  } catch (const Error& e) {
    if (e.code() == Errc::CoercivityViolated) throw;
    s.fail_at(e.code() == Errc::MissingParam || e.code() == Errc::ConfigError ? "name" : "params", e.what());
  }
}

SchemeSpec scheme_from_config(const ConfigFile& cfg, const SdeProblem& p) {
  const ConfigSection s = root_section(cfg).section("scheme");
  s.only({"kind"});
  const std::string kind = s.string("kind", "tem");
  const auto k = parse_scheme_kind(kind);
  if (!k) s.fail_at("kind", "expected \"tem\", \"pem\" or \"em\"");
  if (*k == SchemeKind::CustomMEM) s.fail_at("kind", "custom schemes are available through the library API only");
  return SchemeSpec::for_problem(*k, p);
}

InitialCondition x0_from_config(const ConfigFile& cfg, const SdeProblem& p) {
  const ConfigSection s = root_section(cfg).section("x0");
  if (!s.present()) return InitialCondition::point(Vec::Zero(static_cast<Eigen::Index>(p.d())));
  s.only({"point", "gaussian"});
  if (s.has("point") == s.has("gaussian")) s.fail_at("point", "x0 needs exactly one of \"point\" or \"gaussian\"");
  if (s.has("point")) return InitialCondition::point(s.vector("point", p.d()));
  const ConfigSection g = s.section("gaussian");
  g.only({"mean", "sd"});
  GaussianLaw law{g.vector("mean", p.d()), g.vector("sd", p.d())};
  if ((law.sd.array() < 0.0).any()) g.fail_at("sd", "standard deviations must be >= 0");
  return InitialCondition::gaussian(std::move(law));
}

StudyContext context_from_config(const ConfigFile& cfg) {
  const ConfigSection root = root_section(cfg);
  StudyContext ctx;
  const std::int64_t seed = root.integer("seed", 0);
  if (seed < 0) root.fail_at("seed", "expected a non-negative integer");
  ctx.seed = static_cast<std::uint64_t>(seed);
  ctx.workers = root.count("workers", 1);
  return ctx;
}

namespace {

W1Estimator estimator_from(const ConfigSection& s) {
  const std::string name = s.string("estimator", "auto");
  const auto e = parse_w1_estimator(name);
  if (!e) s.fail_at("estimator", "expected \"auto\", \"sorted\", \"matching\" or \"sliced\"");
  return *e;
}

ConfigSection command_section(const ConfigFile& cfg, std::string_view name) {
  return root_section(cfg).section(name);
}

}  // namespace

SimulateParams simulate_params_from_config(const ConfigFile& cfg) {
  const ConfigSection s = command_section(cfg, "simulate");
  s.only({"tau", "T", "M", "binary"});
  SimulateParams out;
  out.tau = s.number("tau", out.tau);
  out.T = s.number("T", out.T);
  out.M = s.count("M", out.M);
  out.binary = s.boolean("binary", out.binary);
  return out;
}

CheckParams check_params_from_config(const ConfigFile& cfg) {
  const ConfigSection s = command_section(cfg, "check");
  s.only({"n_points", "radius", "tau"});
  CheckParams out;
  out.n_points = s.count("n_points", out.n_points);
  out.radius = s.number("radius", out.radius);
  if (s.has("tau")) out.tau = s.number("tau");
  return out;
}

WeakErrorParams weak_params_from_config(const ConfigFile& cfg, const SdeProblem& p) {
  const ConfigSection s = command_section(cfg, "weak-rate");
  s.only({"T", "taus", "M", "ref_refinement", "estimator", "exact_law"});
  WeakErrorParams out;
  out.T = s.number("T", out.T);
  out.taus = s.numbers("taus");
  out.M = s.count("M", out.M);
  out.ref_refinement = s.integer("ref_refinement", out.ref_refinement);
  out.estimator = estimator_from(s);
  if (s.has("exact_law")) {
    const ConfigSection e = s.section("exact_law");
    e.only({"mean", "sd"});
    out.exact_law = GaussianLaw{e.vector("mean", p.d()), e.vector("sd", p.d())};
  }
  return out;
}

InvariantParams invariant_params_from_config(const ConfigFile& cfg) {
  const ConfigSection s = command_section(cfg, "invariant");
  s.only({"taus", "N_long", "M", "ref_refinement", "estimator", "time_average_T"});
  InvariantParams out;
  out.taus = s.numbers("taus");
  out.N_long = s.integer("N_long");
  out.M = s.count("M", out.M);
  out.ref_refinement = s.integer("ref_refinement", out.ref_refinement);
  out.estimator = estimator_from(s);
  out.time_average_T = s.number("time_average_T", out.time_average_T);
  return out;
}

MomentParams moment_params_from_config(const ConfigFile& cfg) {
  const ConfigSection s = command_section(cfg, "moments");
  s.only({"tau", "N", "M", "orders"});
  MomentParams out;
  out.tau = s.number("tau", out.tau);
  out.N = s.integer("N", out.N);
  out.M = s.count("M", out.M);
  if (s.has("orders")) {
    out.orders.clear();
    for (double q : s.numbers("orders")) {
      if (q != std::floor(q)) s.fail_at("orders", "orders must be integers");
      out.orders.push_back(static_cast<int>(q));
    }
  }
  return out;
}

BlowupParams blowup_params_from_config(const ConfigFile& cfg) {
  const ConfigSection s = command_section(cfg, "blowup");
  s.only({"tau", "N", "M"});
  BlowupParams out;
  out.tau = s.number("tau", out.tau);
  out.N = s.integer("N", out.N);
  out.M = s.count("M", out.M);
  return out;
}

ContractionParams contraction_params_from_config(const ConfigFile& cfg, const SdeProblem& p) {
  const ConfigSection s = command_section(cfg, "contraction");
  s.only({"x0_a", "x0_b", "tau", "T_list", "M"});
  ContractionParams out;
  out.x0_a = s.vector("x0_a", p.d());
  out.x0_b = s.vector("x0_b", p.d());
  out.tau = s.number("tau", out.tau);
  out.T_list = s.numbers("T_list");
  out.M = s.count("M", out.M);
  return out;
}

BelGradParams bel_params_from_config(const ConfigFile& cfg, const SdeProblem& p) {
  const ConfigSection s = command_section(cfg, "bel-grad");
  s.only({"t", "x", "v", "tau", "M", "phi", "fd_h"});
  BelGradParams out;
  out.bel.t = s.number("t", out.bel.t);
  out.bel.x = s.vector("x", p.d());
  out.bel.v = s.vector("v", p.d());
  out.bel.tau = s.number("tau", out.bel.tau);
  out.bel.M = s.count("M", out.bel.M);
  out.phi = s.string("phi", out.phi);
  if (!parse_test_function(out.phi)) s.fail_at("phi", "expected \"first_coordinate\", \"sum\", \"norm\" or \"constant\"");
  if (s.has("fd_h")) out.fd_h = s.number("fd_h");
  return out;
}

std::optional<TestFunction> parse_test_function(std::string_view name) {
  if (name == "first_coordinate") return TestFunction([](const Vec& x) { return x[0]; });
  if (name == "sum") return TestFunction([](const Vec& x) { return x.sum(); });
  if (name == "norm") return TestFunction([](const Vec& x) { return x.norm(); });
  if (name == "constant") return TestFunction([](const Vec&) { return 1.0; });
  return std::nullopt;
}

}  // namespace memsde
