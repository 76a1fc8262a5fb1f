#pragma once

#include "memsde/experiments.hpp"

#include <filesystem>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace memsde {

/// A parsed experiment config with its source text, kept for diagnostics.
///
/// Top-level keys: "schema" (must be "mem-sde/1"), "problem", "scheme", "x0", "seed",
/// "workers" and one optional section per command ("simulate", "check", "weak-rate",
/// "invariant", "moments", "blowup", "contraction", "bel-grad"). Unknown keys are rejected.
struct ConfigFile {
  Json json;
  std::string text;
  std::string source;
};

/// ConfigError with "source:line:col" on malformed JSON, a wrong schema or unknown keys.
ConfigFile parse_config(std::string text, std::string source = "<config>");
/// ConfigError when the file cannot be read.
ConfigFile load_config(const std::filesystem::path& path);

/// "source:line:col" of the first occurrence of `"key"` in the text, or "source" alone.
std::string locate(const ConfigFile& cfg, std::string_view key);

/// Typed, key-checked view of one JSON object of the config.
class ConfigSection {
 public:
  ConfigSection(const ConfigFile& cfg, const Json* object, std::string name);

  bool present() const noexcept { return object_ != nullptr; }
  bool has(std::string_view key) const;
  /// ConfigError on keys outside `allowed`.
  void only(std::initializer_list<std::string_view> allowed) const;

  double number(std::string_view key) const;
  double number(std::string_view key, double fallback) const;
  std::int64_t integer(std::string_view key) const;
  std::int64_t integer(std::string_view key, std::int64_t fallback) const;
  /// Non-negative integer.
  std::size_t count(std::string_view key, std::size_t fallback) const;
  bool boolean(std::string_view key, bool fallback) const;
  std::string string(std::string_view key, std::string fallback) const;
  std::vector<double> numbers(std::string_view key) const;
  /// A number is broadcast to length d; an array must have length d.
  Vec vector(std::string_view key, std::size_t d) const;
  ConfigSection section(std::string_view key) const;
  /// Object of numbers.
  ParamMap params(std::string_view key) const;

  [[noreturn]] void fail_at(std::string_view key, const std::string& message) const;

 private:
  const Json& at(std::string_view key) const;

  const ConfigFile* cfg_;
  const Json* object_;
  std::string name_;
};

ConfigSection root_section(const ConfigFile& cfg);

/// problem: {"name", "params", "constants"}; built-ins only.
SdeProblem problem_from_config(const ConfigFile& cfg);
/// scheme: {"kind": "tem"|"pem"|"em"}; defaults to tem. "custom" needs the library API.
SchemeSpec scheme_from_config(const ConfigFile& cfg, const SdeProblem& p);
/// x0: {"point": number|array} or {"gaussian": {"mean", "sd"}}; defaults to the origin.
InitialCondition x0_from_config(const ConfigFile& cfg, const SdeProblem& p);
StudyContext context_from_config(const ConfigFile& cfg);

struct SimulateParams {
  double tau = 0.01;
  double T = 1.0;
  std::size_t M = 1000;
  bool binary = false;
};

struct CheckParams {
  std::size_t n_points = 10000;
  double radius = 10.0;
  std::optional<double> tau;
};

struct BelGradParams {
  BelParams bel;
  std::string phi = "first_coordinate";
  /// Finite-difference comparison step; absent disables it.
  std::optional<double> fd_h;
};

SimulateParams simulate_params_from_config(const ConfigFile& cfg);
CheckParams check_params_from_config(const ConfigFile& cfg);
WeakErrorParams weak_params_from_config(const ConfigFile& cfg, const SdeProblem& p);
InvariantParams invariant_params_from_config(const ConfigFile& cfg);
MomentParams moment_params_from_config(const ConfigFile& cfg);
BlowupParams blowup_params_from_config(const ConfigFile& cfg);
ContractionParams contraction_params_from_config(const ConfigFile& cfg, const SdeProblem& p);
BelGradParams bel_params_from_config(const ConfigFile& cfg, const SdeProblem& p);

/// "first_coordinate", "sum", "norm" or "constant".
std::optional<TestFunction> parse_test_function(std::string_view name);

}  // namespace memsde
