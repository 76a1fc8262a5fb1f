#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace memsde {

enum class Errc {
  UnknownProblem,
  MissingParam,
  CoercivityViolated,
  NonFiniteEvaluation,
  NonFiniteState,
  OutOfStep,
  ConfigError,
  SingularDiffusion,
  DimensionMismatch,
  UnequalCounts,
  TooLarge,
  EmptyAfterExclusion,
  DivergenceInReference,
  BurnInTooShort,
  DegenerateInput,
  InvalidArgument,
  IoError,
};

std::string_view to_string(Errc code) noexcept;

/// Exception carrying a machine-checkable error category.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& message);

inline void require(bool condition, Errc code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace memsde
