#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ofs/linalg.hpp"
#include "ofs/model.hpp"

namespace ofs {

enum class Adjustment { raw, ofs, curvature };

std::string to_string(Adjustment a);
Adjustment adjustment_from_string(const std::string& s);

struct AdaptConfig {
  bool enabled = true;
  // 0 selects the default: 0.44 for one coordinate, 0.234 otherwise.
  double target_acceptance = 0.0;
  // Long enough that a run of rejections near the mode is not mistaken for a stuck chain.
  int window = 100;
};

struct ChainConfig {
  int iterations = 12000;
  int burn_in = 2000;
  int thin = 1;
  Vector initial;
  // Gaussian random-walk proposal covariance (p x p).
  Matrix proposal_cov;
  AdaptConfig adapt;
  std::uint64_t seed = 1;

  // Throws ConfigError on inconsistent settings.
  void validate(Eigen::Index dim) const;
  int kept_count() const { return (iterations - burn_in + thin - 1) / thin; }
};

/// Retained draws of a sampler run. For post-hoc adjusted chains log_values
/// are those of the raw draws they were mapped from.
struct Chain {
  ParamLayout layout;
  Matrix draws;  // kept iterations x p
  Vector log_values;
  std::uint64_t proposed = 0;
  std::uint64_t accepted = 0;
  double acceptance_rate = 0.0;
  // Proposals or adjusted values that left the support under an adjustment
  // transform.
  std::uint64_t support_violations = 0;
  ChainConfig config;
  Adjustment adjusted = Adjustment::raw;

  Eigen::Index size() const { return draws.rows(); }
  Eigen::Index dim() const { return draws.cols(); }
};

}  // namespace ofs
