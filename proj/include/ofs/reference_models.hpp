#pragma once

#include "ofs/model.hpp"

namespace ofs {

/// Exact likelihood of n iid N(mu, sigma2) observations, theta = (mu, sigma2).
/// Each observation is one replicate (observations is n x 1). Being a true
/// likelihood, P = Q = Fisher information.
class IidNormalModel final : public ObjectiveModel {
 public:
  explicit IidNormalModel(Eigen::Index n);

  std::string name() const override { return "iid_normal"; }
  const ParamLayout& layout() const override { return layout_; }
  Capabilities capabilities() const override { return {true, true, true, true}; }

  double log_objective(const Vector& theta, const Dataset& data) const override;
  Vector score(const Vector& theta, const Dataset& data, Eigen::Index replicate) const override;
  Dataset simulate(const Vector& theta, std::uint64_t seed) const override;
  SpdMatrix analytic_p(const Vector& theta) const override;
  SpdMatrix analytic_q(const Vector& theta) const override;

  Eigen::Index sample_size() const { return n_; }

 private:
  Eigen::Index n_;
  ParamLayout layout_;
};

/// Misspecified Gaussian working likelihood for a location parameter:
/// replicates y_r ~ N(mu, V) but the objective is
///   l(mu) = -1/2 sum_r (y_r - mu)' W^{-1} (y_r - mu).
/// Then Q = n W^{-1}, P = n W^{-1} V W^{-1} and J^{-1} = V / n exactly.
class GaussianWorkingModel final : public ObjectiveModel {
 public:
  GaussianWorkingModel(Eigen::Index n, const SpdMatrix& true_cov, const SpdMatrix& working_cov);

  std::string name() const override { return "gaussian_working"; }
  const ParamLayout& layout() const override { return layout_; }
  Capabilities capabilities() const override { return {true, true, true, true}; }

  double log_objective(const Vector& theta, const Dataset& data) const override;
  Vector score(const Vector& theta, const Dataset& data, Eigen::Index replicate) const override;
  Dataset simulate(const Vector& theta, std::uint64_t seed) const override;
  SpdMatrix analytic_p(const Vector& theta) const override;
  SpdMatrix analytic_q(const Vector& theta) const override;

  /// Asymptotic covariance J^{-1} = Q^{-1} P Q^{-1} = V / n.
  Matrix godambe_inverse() const;

 private:
  Eigen::Index n_;
  Matrix true_cov_;
  Matrix working_precision_;
  Eigen::LLT<Matrix> true_chol_;
  ParamLayout layout_;
};

}  // namespace ofs
