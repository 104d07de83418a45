#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ofs/chain.hpp"
#include "ofs/gp_taper.hpp"
#include "ofs/io.hpp"
#include "ofs/samplers.hpp"
#include "ofs/sandwich.hpp"

namespace ofs {

/// Synthetic spatio-temporal Poisson regression with a Gneiting log-mean field:
///   y_i ~ Pois(exp(b_i)),  b ~ N(X beta, Sigma(theta)),  beta ~ N(0, s2_beta I).
/// theta = (sigma2, a, c, omega, nugget).
struct PoissonDemoConfig {
  int sites = 150;
  double domain = 10.0;      // sites uniform on [0, domain]^2
  double time_span = 365.0;  // one observation time per site, uniform on [0, span)
  Vector theta;              // defaults to (1, 0.001, 0.5, 0.5, 0.1)
  Vector beta;               // defaults to (1, 0.5): intercept and one N(0,1) covariate
  double spatial_range = 3.0;
  double temporal_range = 60.0;
  double prior_scale = 5.0;  // half-Cauchy scale for positive parameters and s2_beta
  int iterations = 10000;
  int burn_in = 5000;
  int thin = 1;
  AdaptConfig adapt;
  std::uint64_t seed = 1;
  /// Coordinates of theta left unadjusted. When unset, unit-interval
  /// coordinates whose raw draws look uniform are excluded.
  std::optional<std::vector<std::string>> exclude;

  static PoissonDemoConfig defaults();
  void validate() const;
};

struct PoissonDemoData {
  Matrix locations;
  Vector times;
  Matrix covariates;
  Vector counts;
  Vector log_means;  // the simulated b
};

PoissonDemoData simulate_poisson_demo(const PoissonDemoConfig& config);

struct PoissonDemoResult {
  Chain raw;       // beta, theta and s2_beta columns; b is not retained
  Chain adjusted;
  std::vector<BlockStats> raw_blocks;
  std::vector<BlockStats> adjusted_blocks;
  AdjustmentMatrix omega;
  std::vector<std::string> excluded;
  Json summary;
};

/// Two passes: an unadjusted Gibbs run, then the marginal OFS run with the
/// theta adjustment from plug-in P and Q at the quasi-posterior mean.
PoissonDemoResult run_poisson_demo(const PoissonDemoConfig& config);

/// Unit-interval coordinates whose draws have a standard deviation above 80%
/// of the uniform one. A heuristic; pass an explicit list to override.
std::vector<Eigen::Index> near_uniform_coordinates(const Chain& chain);

}  // namespace ofs
