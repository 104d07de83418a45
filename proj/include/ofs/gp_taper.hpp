#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "ofs/linalg.hpp"
#include "ofs/model.hpp"
#include "ofs/rng.hpp"

namespace ofs {

// Covariance families -------------------------------------------------------

/// sigma2 * exp(-(c / sigma2) * h). Note the decay couples c and sigma2.
double cov_exponential(double sigma2, double c, double h);

struct GneitingParams {
  double sigma2 = 1.0;
  double a = 1.0;      // temporal scale
  double c = 1.0;      // spatial decay
  double omega = 0.0;  // separability in [0, 1]
  double alpha = 1.0;  // temporal smoothness, fixed
  double gamma = 0.5;  // spatial smoothness, fixed
};

/// sigma2 / psi^2 * exp(-(c / sigma2) h^{2 gamma} / psi^{omega gamma}),
/// psi = a u^{2 alpha} + 1.
double cov_gneiting(const GneitingParams& params, double h, double u);

enum class CovarianceKind { exponential, gneiting };

/// Parametric covariance C(theta; h, u) with parameter order
///   exponential: sigma2, c [, nugget]
///   gneiting:    sigma2, a, c, omega [, nugget]
/// The nugget, when present, is added on the diagonal only.
class CovarianceFamily {
 public:
  static CovarianceFamily exponential(bool nugget = false);
  static CovarianceFamily gneiting(bool nugget = true, double alpha = 1.0, double gamma = 0.5);

  CovarianceKind kind() const { return kind_; }
  bool has_nugget() const { return nugget_; }
  double alpha() const { return alpha_; }
  double gamma() const { return gamma_; }
  const ParamLayout& layout() const { return layout_; }
  Eigen::Index parameter_count() const { return layout_.size(); }

  /// Throws DomainError when theta is invalid (sigma2, c, a <= 0, omega outside [0,1]).
  void validate(const Vector& theta) const;

  /// Covariance at lag (h, u) without the nugget.
  double value(const Vector& theta, double h, double u) const;
  /// d value / d theta_k written into grad (size parameter_count); the nugget
  /// derivative slot is 0 here and handled on the diagonal by callers.
  void gradient(const Vector& theta, double h, double u, double* grad) const;
  double nugget(const Vector& theta) const { return nugget_ ? theta[layout_.size() - 1] : 0.0; }
  Eigen::Index nugget_index() const { return nugget_ ? layout_.size() - 1 : -1; }

 private:
  CovarianceFamily(CovarianceKind kind, bool nugget, double alpha, double gamma);
  GneitingParams gneiting_params(const Vector& theta) const;

  CovarianceKind kind_;
  bool nugget_;
  double alpha_;
  double gamma_;
  ParamLayout layout_;
};

// Tapers ----------------------------------------------------------------------

enum class TaperKernel {
  wendland,   // (1 - d/r)^4_+ (4 d / r + 1)
  indicator,  // 1 below the range, 0 beyond; a valid correlation only when the
              // range exceeds every pairwise lag
};

struct TaperSpec {
  double spatial_range = 4.0;
  std::optional<double> temporal_range;
  TaperKernel kernel = TaperKernel::wendland;
};

double wendland(double d, double range);

/// Spatial kernel times temporal kernel (when a temporal range is set).
/// Exactly 0 at or beyond either range.
double taper_value(const TaperSpec& spec, double h, double u = 0.0);

/// m x m grid with the given spacing; rows are (x, y), x varying fastest.
Matrix grid_locations(Eigen::Index m, double spacing = 1.0);

// Sparse storage --------------------------------------------------------------

/// Symmetric sparse matrix stored as its lower triangle (diagonal included) in
/// compressed-column form. Every diagonal entry is stored.
class SparseSymMatrix {
 public:
  SparseSymMatrix(Eigen::Index dim, std::vector<int> col_ptr, std::vector<int> row_idx,
                  std::vector<double> values);

  Eigen::Index dim() const { return dim_; }
  const std::vector<int>& col_ptr() const { return col_ptr_; }
  const std::vector<int>& row_idx() const { return row_idx_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t stored_entries() const { return values_.size(); }

  /// Nonzeros of the full symmetric matrix over dim^2.
  double fill_fraction() const;
  Matrix to_dense() const;
  double operator()(Eigen::Index i, Eigen::Index j) const;

  /// y = A x
  Vector multiply(const Vector& x) const;
  /// x' A x
  double quadratic_form(const Vector& x) const;

 private:
  Eigen::Index dim_;
  std::vector<int> col_ptr_;
  std::vector<int> row_idx_;
  std::vector<double> values_;
};

// Tapered Gaussian process ------------------------------------------------------

/// Result of one sparse evaluation at theta: log|A| for A = Sigma o T, and
/// B = A^{-1} o T restricted to the taper pattern.
struct TaperedFactor {
  double log_det = 0.0;
  std::vector<double> restricted_inverse;  // (A^{-1})_ij on the stored pattern
  std::vector<double> b_values;            // B_ij = T_ij (A^{-1})_ij on the stored pattern
};

/// Precomputed design for the tapered likelihood: the taper pattern, lags and
/// taper weights of each stored pair, a fill-reducing ordering, and the
/// symbolic LDL' analysis. Immutable after construction; evaluations allocate
/// their own workspaces and may run concurrently.
class TaperedGp {
 public:
  TaperedGp(CovarianceFamily family, TaperSpec taper, Matrix locations, Vector times = {});

  const CovarianceFamily& family() const { return family_; }
  const TaperSpec& taper() const { return taper_; }
  const Matrix& locations() const { return locations_; }
  const Vector& times() const { return times_; }
  Eigen::Index size() const { return n_; }

  /// Pattern of stored pairs (lower triangle, diagonal included).
  const std::vector<int>& col_ptr() const { return col_ptr_; }
  const std::vector<int>& row_idx() const { return row_idx_; }
  double fill_fraction() const;

  /// Sigma(theta) o T on the taper pattern.
  SparseSymMatrix tapered_covariance(const Vector& theta) const;

  /// Sparse LDL' of Sigma o T plus the restricted inverse on the pattern.
  /// Throws DomainError when the factorization breaks down.
  TaperedFactor factor(const Vector& theta) const;

  /// B = (Sigma o T)^{-1} o T as a sparse matrix.
  SparseSymMatrix tapered_precision(const Vector& theta) const;

  /// Tapered log-likelihood of residual r = y - X beta via the sparse path.
  double loglik(const Vector& theta, const Vector& residual) const;
  /// Same, reusing a factorization of Sigma(theta) o T.
  double loglik(const TaperedFactor& factor, const Vector& residual) const;
  /// B x with B = (Sigma o T)^{-1} o T from a factorization.
  Vector precision_multiply(const TaperedFactor& factor, const Vector& x) const;
  /// Same quantity through dense matrices; a reference path for testing.
  double loglik_dense(const Vector& theta, const Vector& residual) const;

  /// Analytic score: -1/2 tr(A^{-1} dA_i) - 1/2 r' M_i r with
  /// M_i = -(A^{-1} (dSigma_i o T) A^{-1}) o T.
  Vector score(const Vector& theta, const Vector& residual) const;

  /// Plug-in sandwich components at theta. P_ij = 1/2 tr(M_i Sigma M_j Sigma);
  /// Q = -Hessian of q(t) = -1/2 log|A(t)| - 1/2 tr(B(t) Sigma(theta)) at t = theta.
  std::pair<SpdMatrix, SpdMatrix> analytic_pq(const Vector& theta) const;
  SpdMatrix analytic_p(const Vector& theta) const;
  SpdMatrix analytic_q(const Vector& theta) const;

  /// Expected tapered log-likelihood at `at` (up to the 2 pi constant) when
  /// data come from `truth`.
  double expected_loglik(const Vector& at, const Vector& truth) const;

  /// Dense Sigma(theta) including the nugget.
  Matrix covariance_dense(const Vector& theta) const;
  /// Dense derivative dSigma / d theta_k.
  Matrix covariance_derivative_dense(const Vector& theta, Eigen::Index k) const;
  /// Dense taper matrix T.
  Matrix taper_dense() const;

 private:
  double lag_space(Eigen::Index i, Eigen::Index j) const;
  double lag_time(Eigen::Index i, Eigen::Index j) const;
  std::vector<double> pattern_covariance(const Vector& theta) const;
  std::vector<Matrix> score_matrices(const Vector& theta, const Matrix& a_inv) const;

  CovarianceFamily family_;
  TaperSpec taper_;
  Matrix locations_;
  Vector times_;
  Eigen::Index n_;

  // Lower-triangle CSC pattern in original ordering with per-entry lags/taper.
  std::vector<int> col_ptr_;
  std::vector<int> row_idx_;
  std::vector<double> lag_h_;
  std::vector<double> lag_u_;
  std::vector<double> taper_w_;
  std::vector<char> is_diag_;

  // Fill-reducing ordering: perm_[k] = original index placed at position k.
  std::vector<int> perm_;
  std::vector<int> perm_inv_;
  // Permuted full-symmetric CSC of A used by the numeric LDL': per column,
  // (permuted row, index into the original pattern entry arrays).
  std::vector<int> ap_;
  std::vector<int> ai_;
  std::vector<int> a_entry_;
  // Symbolic LDL'
  std::vector<int> parent_;
  std::vector<int> l_ptr_;
  // For each original pattern entry, position of (permuted) max/min pair.
  std::vector<int> entry_pi_;
  std::vector<int> entry_pj_;
};

/// Remembers the factorizations at the two most recently requested parameter
/// values (compared bitwise). Gibbs scans revisit the current value several
/// times. Not safe for concurrent use; keep one per task.
class TaperedFactorCache {
 public:
  explicit TaperedFactorCache(const TaperedGp& gp) : gp_(&gp) {}
  const TaperedFactor& get(const Vector& theta);
  const TaperedGp& gp() const { return *gp_; }

 private:
  const TaperedGp* gp_;
  Vector keys_[2];
  TaperedFactor values_[2];
  int next_ = 0;
};

/// -(n/2) log 2 pi - 1/2 log|Sigma| - 1/2 r' Sigma^{-1} r via dense Cholesky.
double full_gaussian_loglik(const Matrix& sigma, const Vector& residual);

/// Dense Sigma for the given family at the locations (and times).
Matrix covariance_matrix(const CovarianceFamily& family, const Vector& theta,
                         const Matrix& locations, const Vector& times = {});

/// Convenience forms over a dataset; the mean term X beta enters only when beta
/// is supplied (and requires data.covariates).
double full_gaussian_loglik(const CovarianceFamily& family, const Vector& theta,
                            const Dataset& data, const std::optional<Vector>& beta = std::nullopt);
double tapered_loglik(const CovarianceFamily& family, const TaperSpec& taper, const Vector& theta,
                      const Dataset& data, const std::optional<Vector>& beta = std::nullopt);
Vector tapered_score(const CovarianceFamily& family, const TaperSpec& taper, const Vector& theta,
                     const Dataset& data, const std::optional<Vector>& beta = std::nullopt);
std::pair<SpdMatrix, SpdMatrix> analytic_pq_tapered(const CovarianceFamily& family,
                                                    const TaperSpec& taper,
                                                    const Matrix& locations, const Vector& theta,
                                                    const Vector& times = {});
SparseSymMatrix build_tapered_matrix(const CovarianceFamily& family, const TaperSpec& taper,
                                     const Vector& theta, const Matrix& locations,
                                     const Vector& times = {});

/// y = X beta + L z, L the Cholesky factor of Sigma(theta).
Dataset simulate_gp(const CovarianceFamily& family, const Vector& theta, const Matrix& locations,
                    std::uint64_t seed, const Vector& times = {},
                    const std::optional<Matrix>& covariates = std::nullopt,
                    const std::optional<Vector>& beta = std::nullopt);

Vector gp_residual(const Dataset& data, const std::optional<Vector>& beta);

// ObjectiveModel adapters --------------------------------------------------------

/// Single-realization Gaussian-process objective. `tapered` uses the tapered
/// likelihood; otherwise the exact likelihood (for which P = Q = Fisher).
/// An optional fixed mean X beta is subtracted before evaluation and added by
/// the simulator.
class GpModel final : public ObjectiveModel {
 public:
  enum class Objective { tapered, exact };

  GpModel(TaperedGp gp, Objective objective, std::optional<Matrix> covariates = std::nullopt,
          std::optional<Vector> beta = std::nullopt);

  std::string name() const override;
  const ParamLayout& layout() const override { return gp_.family().layout(); }
  Capabilities capabilities() const override { return {true, true, true, true}; }

  double log_objective(const Vector& theta, const Dataset& data) const override;
  /// Only replicate 0 exists.
  Vector score(const Vector& theta, const Dataset& data, Eigen::Index replicate) const override;
  Dataset simulate(const Vector& theta, std::uint64_t seed) const override;
  SpdMatrix analytic_p(const Vector& theta) const override;
  SpdMatrix analytic_q(const Vector& theta) const override;

  const TaperedGp& gp() const { return gp_; }
  Objective objective() const { return objective_; }

 private:
  Vector residual(const Dataset& data) const;
  SpdMatrix fisher(const Vector& theta) const;

  TaperedGp gp_;
  Objective objective_;
  std::optional<Matrix> covariates_;
  std::optional<Vector> beta_;
};

}  // namespace ofs
