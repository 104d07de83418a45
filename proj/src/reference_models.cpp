#include "ofs/reference_models.hpp"

#include <cmath>
#include <numbers>

#include "ofs/errors.hpp"
#include "ofs/rng.hpp"

namespace ofs {

IidNormalModel::IidNormalModel(Eigen::Index n)
    : n_(n), layout_({"mu", "sigma2"}, {Support::real, Support::positive}) {
  if (n < 1) throw DomainError("iid normal model needs n >= 1");
}

double IidNormalModel::log_objective(const Vector& theta, const Dataset& data) const {
  const double mu = theta[0];
  const double s2 = theta[1];
  const Vector y = data.observations.col(0);
  const double ss = (y.array() - mu).square().sum();
  const auto n = static_cast<double>(y.size());
  return -0.5 * n * std::log(2.0 * std::numbers::pi * s2) - 0.5 * ss / s2;
}

Vector IidNormalModel::score(const Vector& theta, const Dataset& data, Eigen::Index r) const {
  const double mu = theta[0];
  const double s2 = theta[1];
  const double e = data.observations(r, 0) - mu;
  Vector s(2);
  s << e / s2, -0.5 / s2 + 0.5 * e * e / (s2 * s2);
  return s;
}

Dataset IidNormalModel::simulate(const Vector& theta, std::uint64_t seed) const {
  Rng rng(seed);
  Dataset d;
  d.observations = (standard_normal_vector(rng, n_) * std::sqrt(theta[1])).array() + theta[0];
  return d;
}

SpdMatrix IidNormalModel::analytic_p(const Vector& theta) const { return analytic_q(theta); }

SpdMatrix IidNormalModel::analytic_q(const Vector& theta) const {
  const double s2 = theta[1];
  const auto n = static_cast<double>(n_);
  Matrix f = Matrix::Zero(2, 2);
  f(0, 0) = n / s2;
  f(1, 1) = n / (2.0 * s2 * s2);
  return SpdMatrix(f);
}

GaussianWorkingModel::GaussianWorkingModel(Eigen::Index n, const SpdMatrix& true_cov,
                                           const SpdMatrix& working_cov)
    : n_(n),
      true_cov_(true_cov.matrix()),
      working_precision_(spd_inverse(working_cov).matrix()),
      true_chol_(true_cov.matrix()) {
  if (true_cov.dim() != working_cov.dim()) {
    throw DimensionMismatch("true and working covariances differ in dimension");
  }
  for (Eigen::Index i = 0; i < true_cov.dim(); ++i) {
    layout_.names.push_back("mu" + std::to_string(i + 1));
    layout_.supports.push_back(Support::real);
  }
}

double GaussianWorkingModel::log_objective(const Vector& theta, const Dataset& data) const {
  const Matrix centered = data.observations.rowwise() - theta.transpose();
  return -0.5 * (centered * working_precision_).cwiseProduct(centered).sum();
}

Vector GaussianWorkingModel::score(const Vector& theta, const Dataset& data,
                                   Eigen::Index r) const {
  return working_precision_ * (data.replicate(r) - theta);
}

Dataset GaussianWorkingModel::simulate(const Vector& theta, std::uint64_t seed) const {
  Rng rng(seed);
  const Eigen::Index p = theta.size();
  Dataset d;
  d.observations.resize(n_, p);
  for (Eigen::Index r = 0; r < n_; ++r) {
    d.observations.row(r) = (theta + true_chol_.matrixL() * standard_normal_vector(rng, p)).transpose();
  }
  return d;
}

SpdMatrix GaussianWorkingModel::analytic_p(const Vector&) const {
  return SpdMatrix(static_cast<double>(n_) * working_precision_ * true_cov_ * working_precision_);
}

SpdMatrix GaussianWorkingModel::analytic_q(const Vector&) const {
  return SpdMatrix(static_cast<double>(n_) * working_precision_);
}

Matrix GaussianWorkingModel::godambe_inverse() const {
  return true_cov_ / static_cast<double>(n_);
}

}  // namespace ofs
