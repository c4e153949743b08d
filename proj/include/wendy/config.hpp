#pragma once

#include <string>

#include "wendy/bench.hpp"

namespace wendy {

/// Complete configuration document for the CLI. Every field has a default;
/// a config file only needs the keys it changes. Unknown keys are rejected.
struct RunConfig {
  ExperimentConfig experiment;
  /// Worker threads for benchmarks, 0 = all cores.
  int jobs = 0;
  /// Confidence level for reported parameter intervals.
  double ci_level = 0.95;

  void validate() const;
};

/// Parses a JSON config. Syntax errors raise ParseError with line and
/// column; unknown keys and type errors raise ConfigError naming the key.
[[nodiscard]] RunConfig parse_run_config(const std::string& text);

/// Fully resolved configuration as pretty-printed JSON.
[[nodiscard]] std::string dump_run_config(const RunConfig& cfg);

[[nodiscard]] std::string to_string(IntegratorMethod m);
[[nodiscard]] IntegratorMethod integrator_method_from(const std::string& s);

}  // namespace wendy
