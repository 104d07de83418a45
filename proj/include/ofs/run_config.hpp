#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "ofs/coverage.hpp"
#include "ofs/poisson_demo.hpp"

namespace ofs {

/// Parsed command-line configuration. A JSON document with the sections
///   scenario, model, prior, chain, sandwich, coverage, output, seed, threads,
///   poisson
/// all optional except where a command needs them. Unknown keys are errors.
struct RunConfig {
  std::optional<Scenario> scenario;
  ExperimentConfig experiment;  // scenario defaults with overrides applied
  PoissonDemoConfig poisson;
  std::filesystem::path out_dir = ".";
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string source;  // file name used in messages

  /// The experiment settings; throws ConfigError when no scenario was given.
  const ExperimentConfig& require_scenario() const;
};

/// Throws ConfigError("<source>:<line>: <json pointer>: <problem>") for
/// malformed JSON and schema violations, and ConfigError("<source>: ...") for
/// inconsistent values.
RunConfig parse_run_config(const std::string& text, const std::string& source = "config");
RunConfig load_run_config(const std::filesystem::path& path);

/// 1-based line of the value at `pointer` in `text`, found by walking the
/// pointer's keys in document order; 0 when it cannot be located.
int locate_pointer_line(const std::string& text, const std::string& pointer);

/// Applies an explicit master seed everywhere a seed is used.
void override_seed(RunConfig& config, std::uint64_t seed);

}  // namespace ofs
