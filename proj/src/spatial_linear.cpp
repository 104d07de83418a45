#include "ofs/spatial_linear.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "ofs/errors.hpp"

namespace ofs {

SpatialLinearModel::SpatialLinearModel(TaperedGp gp, Matrix covariates, PriorSpec theta_prior,
                                       double beta_prior_sd)
    : gp_(std::move(gp)),
      x_(std::move(covariates)),
      theta_prior_(std::move(theta_prior)),
      beta_prior_sd_(beta_prior_sd) {
  if (x_.rows() != gp_.size() || x_.cols() < 1) {
    throw DimensionMismatch("covariate matrix must be n x q with q >= 1");
  }
  if (!(beta_prior_sd_ > 0.0)) throw DomainError("beta prior sd must be positive");
  validate_prior(theta_prior_, gp_.family().layout());
  layout_ = gp_.family().layout();
  for (Eigen::Index k = 0; k < x_.cols(); ++k) {
    layout_.names.push_back("beta" + std::to_string(k + 1));
    layout_.supports.push_back(Support::real);
  }
}

double SpatialLinearModel::theta_log_conditional(const Vector& theta, const Vector& beta,
                                                 const Dataset& data,
                                                 TaperedFactorCache& cache) const {
  if (!gp_.family().layout().contains(theta)) return -std::numeric_limits<double>::infinity();
  const double lp = log_prior(theta_prior_, theta);
  if (lp == -std::numeric_limits<double>::infinity()) return lp;
  const Vector r = data.replicate(0) - x_ * beta;
  return gp_.loglik(cache.get(theta), r) + lp;
}

GaussianConditional SpatialLinearModel::beta_conditional(const Vector& theta, const Dataset& data,
                                                         TaperedFactorCache& cache) const {
  const TaperedFactor& f = cache.get(theta);
  const Eigen::Index q = x_.cols();
  Matrix bx(gp_.size(), q);
  for (Eigen::Index k = 0; k < q; ++k) bx.col(k) = gp_.precision_multiply(f, x_.col(k));
  Matrix precision = x_.transpose() * bx;
  precision.diagonal().array() += 1.0 / (beta_prior_sd_ * beta_prior_sd_);
  const Vector rhs = bx.transpose() * data.replicate(0);
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) {
    throw DomainError("beta conditional precision is not positive definite");
  }
  GaussianConditional c;
  c.cov = llt.solve(Matrix::Identity(q, q));
  c.mean = llt.solve(rhs);
  return c;
}

Vector SpatialLinearModel::gls_beta(const Vector& theta, const Dataset& data,
                                    TaperedFactorCache& cache) const {
  return beta_conditional(theta, data, cache).mean;
}

std::vector<GibbsBlockSpec> SpatialLinearModel::blocks(const Dataset& data,
                                                       TaperedFactorCache& cache,
                                                       const Matrix& theta_proposal) const {
  const Eigen::Index p = theta_dim();
  const Eigen::Index q = beta_dim();
  GibbsBlockSpec theta_block;
  theta_block.id = "theta";
  theta_block.kind = BlockKind::metropolis;
  theta_block.quasi = true;
  for (Eigen::Index i = 0; i < p; ++i) theta_block.coordinates.push_back(i);
  theta_block.proposal_cov = theta_proposal;
  theta_block.log_conditional = [this, &data, &cache](const Vector& full) {
    return theta_log_conditional(theta_part(full), beta_part(full), data, cache);
  };

  GibbsBlockSpec beta_block;
  beta_block.id = "beta";
  beta_block.kind = BlockKind::conjugate;
  for (Eigen::Index i = 0; i < q; ++i) beta_block.coordinates.push_back(p + i);
  beta_block.conditional = [this, &data, &cache](const Vector& full) {
    return beta_conditional(theta_part(full), data, cache);
  };
  return {theta_block, beta_block};
}

Dataset SpatialLinearModel::simulate(const Vector& theta, const Vector& beta,
                                     std::uint64_t seed) const {
  return simulate_gp(gp_.family(), theta, gp_.locations(), seed, gp_.times(), x_, beta);
}

}  // namespace ofs
