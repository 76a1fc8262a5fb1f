#include "memsde/error.hpp"

namespace memsde {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::UnknownProblem: return "UnknownProblem";
    case Errc::MissingParam: return "MissingParam";
    case Errc::CoercivityViolated: return "CoercivityViolated";
    case Errc::NonFiniteEvaluation: return "NonFiniteEvaluation";
    case Errc::NonFiniteState: return "NonFiniteState";
    case Errc::OutOfStep: return "OutOfStep";
    case Errc::ConfigError: return "ConfigError";
    case Errc::SingularDiffusion: return "SingularDiffusion";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::UnequalCounts: return "UnequalCounts";
    case Errc::TooLarge: return "TooLarge";
    case Errc::EmptyAfterExclusion: return "EmptyAfterExclusion";
    case Errc::DivergenceInReference: return "DivergenceInReference";
    case Errc::BurnInTooShort: return "BurnInTooShort";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(Errc code, const std::string& message) { throw Error(code, message); }

}  // namespace memsde
