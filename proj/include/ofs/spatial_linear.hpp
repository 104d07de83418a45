#pragma once

#include <cstdint>
#include <vector>

#include "ofs/gp_taper.hpp"
#include "ofs/samplers.hpp"
#include "ofs/sandwich.hpp"

namespace ofs {

/// y = X beta + e with e a zero-mean Gaussian process. The covariance
/// parameters enter through the tapered likelihood of y - X beta; beta has a
/// N(0, beta_prior_sd^2 I) prior, which makes beta | theta Gaussian.
///
/// The full parameter is (theta, beta), theta first.
class SpatialLinearModel {
 public:
  SpatialLinearModel(TaperedGp gp, Matrix covariates, PriorSpec theta_prior,
                     double beta_prior_sd = 10.0);

  const TaperedGp& gp() const { return gp_; }
  const Matrix& covariates() const { return x_; }
  const PriorSpec& theta_prior() const { return theta_prior_; }
  const ParamLayout& layout() const { return layout_; }
  Eigen::Index theta_dim() const { return gp_.family().parameter_count(); }
  Eigen::Index beta_dim() const { return x_.cols(); }

  /// Tapered log-likelihood of y - X beta plus the theta prior.
  double theta_log_conditional(const Vector& theta, const Vector& beta, const Dataset& data,
                               TaperedFactorCache& cache) const;
  /// beta | theta, y under the tapered quadratic form.
  GaussianConditional beta_conditional(const Vector& theta, const Dataset& data,
                                       TaperedFactorCache& cache) const;

  /// Blocks {theta: quasi Metropolis, beta: conjugate}. The returned closures
  /// refer to `data` and `cache`, which must outlive them.
  std::vector<GibbsBlockSpec> blocks(const Dataset& data, TaperedFactorCache& cache,
                                     const Matrix& theta_proposal) const;

  Dataset simulate(const Vector& theta, const Vector& beta, std::uint64_t seed) const;

  /// Generalized least squares under the tapered quadratic form at theta.
  Vector gls_beta(const Vector& theta, const Dataset& data, TaperedFactorCache& cache) const;

  Vector theta_part(const Vector& full) const { return full.head(theta_dim()); }
  Vector beta_part(const Vector& full) const { return full.tail(beta_dim()); }

 private:
  TaperedGp gp_;
  Matrix x_;
  PriorSpec theta_prior_;
  double beta_prior_sd_;
  ParamLayout layout_;
};

}  // namespace ofs
