#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wendy {

/// Machine-readable failure categories. Every error raised by the library
/// carries one of these so callers (the CLI in particular) can map them to
/// stable codes without parsing messages.
enum class ErrorCode {
  DimensionMismatch,
  NonFiniteData,
  DomainViolation,
  InvalidArgument,
  StepSizeUnderflow,
  MaxStepsExceeded,
  SolutionBlowUp,
  RadiusTooLarge,
  DegenerateSeries,
  RankDeficient,
  RankDeficientG,
  SampleTooSmall,
  SampleTooLarge,
  DegenerateSample,
  SeriesTooShort,
  TooFewSamples,
  CholeskyFailure,
  UnknownModel,
  IndivisibleFactor,
  InitialPointInfeasible,
  AllStartsFailed,
  NonUniformGrid,
  ParseError,
  ConfigError,
  IOError,
};

[[nodiscard]] std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace wendy
