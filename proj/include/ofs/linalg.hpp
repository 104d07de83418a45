#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <span>

namespace ofs {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Dense symmetric matrix. Storage is symmetrized on construction as (A + A')/2,
/// so the stored entries are exactly symmetric.
class SymMatrix {
 public:
  explicit SymMatrix(const Matrix& a);
  static SymMatrix zero(Eigen::Index dim);
  static SymMatrix identity(Eigen::Index dim);

  Eigen::Index dim() const { return a_.rows(); }
  const Matrix& matrix() const { return a_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return a_(i, j); }

  // Ascending eigenvalues.
  Vector eigenvalues() const;

 private:
  Matrix a_;
};

/// A SymMatrix certified positive definite: the smallest eigenvalue exceeds
/// pd_tolerance() times the largest.
class SpdMatrix {
 public:
  // Throws DomainError naming the offending eigenvalue.
  explicit SpdMatrix(const SymMatrix& a);
  explicit SpdMatrix(const Matrix& a) : SpdMatrix(SymMatrix(a)) {}

  static SpdMatrix identity(Eigen::Index dim) { return SpdMatrix(SymMatrix::identity(dim)); }

  Eigen::Index dim() const { return sym_.dim(); }
  const Matrix& matrix() const { return sym_.matrix(); }
  const SymMatrix& sym() const { return sym_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return sym_(i, j); }

  const Vector& eigenvalues() const { return eigenvalues_; }
  const Matrix& eigenvectors() const { return eigenvectors_; }
  double condition_number() const { return eigenvalues_.maxCoeff() / eigenvalues_.minCoeff(); }

  static constexpr double pd_tolerance() { return 1e-12; }

 private:
  SymMatrix sym_;
  Vector eigenvalues_;
  Matrix eigenvectors_;
};

/// Condition numbers above this are refused by spd_inverse.
inline constexpr double kMaxInverseCondition = 1e10;

/// A^{1/2} = O D^{1/2} O' from the symmetric eigendecomposition A = O D O'.
SpdMatrix spd_sqrt(const SpdMatrix& a);

/// Throws ConditioningError when the condition number exceeds kMaxInverseCondition.
SpdMatrix spd_inverse(const SpdMatrix& a);

/// Unbiased (divisor J-1) covariance of the rows of `draws` (J rows x p columns).
SymMatrix sample_covariance(const Matrix& draws);

using ScalarFunction = std::function<double(const Vector&)>;

/// Default steps: max(|theta_i|, 1) * eps^{1/3} (gradient), eps^{1/4} (Hessian).
Vector default_gradient_steps(const Vector& theta);
Vector default_hessian_steps(const Vector& theta);

/// Central differences (f(t + h_i e_i) - f(t - h_i e_i)) / (2 h_i).
/// Throws DomainError carrying the failing point when f is not finite.
Vector numerical_gradient(const ScalarFunction& f, const Vector& theta,
                          std::optional<Vector> steps = std::nullopt);

/// Central second differences, symmetrized.
SymMatrix numerical_hessian(const ScalarFunction& f, const Vector& theta,
                            std::optional<Vector> steps = std::nullopt);

/// Linear interpolation between order statistics (type 7). p in [0, 1].
double empirical_quantile(std::span<const double> samples, double p);

/// Same, on data that is already sorted ascending.
double sorted_quantile(std::span<const double> sorted, double p);

}  // namespace ofs
