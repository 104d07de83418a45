#include "ofs/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>

#include "ofs/errors.hpp"

namespace ofs {

namespace {

std::string format_point(const Vector& x) {
  std::ostringstream out;
  out.precision(17);
  out << "(";
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    out << (i ? ", " : "") << x[i];
  }
  out << ")";
  return out.str();
}

double checked_eval(const ScalarFunction& f, const Vector& x) {
  const double v = f(x);
  if (!std::isfinite(v)) {
    throw DomainError("non-finite function value " + std::to_string(v) + " at " + format_point(x));
  }
  return v;
}

}  // namespace

SymMatrix::SymMatrix(const Matrix& a) {
  if (a.rows() == 0 || a.rows() != a.cols()) {
    throw DimensionMismatch("symmetric matrix must be square with positive dimension");
  }
  a_ = 0.5 * (a + a.transpose());
}

SymMatrix SymMatrix::zero(Eigen::Index dim) { return SymMatrix(Matrix::Zero(dim, dim)); }

SymMatrix SymMatrix::identity(Eigen::Index dim) { return SymMatrix(Matrix::Identity(dim, dim)); }

Vector SymMatrix::eigenvalues() const {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a_, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

SpdMatrix::SpdMatrix(const SymMatrix& a) : sym_(a) {
  if (!sym_.matrix().allFinite()) {
    throw DomainError("matrix has non-finite entries; not positive definite");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym_.matrix());
  if (es.info() != Eigen::Success) {
    throw DomainError("eigendecomposition failed; not positive definite");
  }
  eigenvalues_ = es.eigenvalues();
  eigenvectors_ = es.eigenvectors();
  const double largest = eigenvalues_.maxCoeff();
  const double smallest = eigenvalues_.minCoeff();
  if (!(largest > 0.0) || !(smallest > pd_tolerance() * largest)) {
    std::ostringstream msg;
    msg.precision(6);
    msg << "matrix is not positive definite: eigenvalue " << smallest
        << " <= " << pd_tolerance() << " x largest eigenvalue " << largest
        << " (eigenvalues: " << format_point(eigenvalues_) << ")";
    throw DomainError(msg.str());
  }
}

SpdMatrix spd_sqrt(const SpdMatrix& a) {
  const Matrix& o = a.eigenvectors();
  Matrix s = o * a.eigenvalues().cwiseSqrt().asDiagonal() * o.transpose();
  return SpdMatrix(s);
}

SpdMatrix spd_inverse(const SpdMatrix& a) {
  const double cond = a.condition_number();
  if (!(cond <= kMaxInverseCondition)) {
    std::ostringstream msg;
    msg << "matrix too ill-conditioned to invert: condition number estimate " << cond;
    throw ConditioningError(msg.str(), cond);
  }
  const Matrix& o = a.eigenvectors();
  Matrix inv = o * a.eigenvalues().cwiseInverse().asDiagonal() * o.transpose();
  return SpdMatrix(inv);
}

SymMatrix sample_covariance(const Matrix& draws) {
  if (draws.rows() < 2) {
    throw DomainError("sample covariance needs at least 2 rows, got " +
                      std::to_string(draws.rows()));
  }
  const Eigen::RowVectorXd mean = draws.colwise().mean();
  const Matrix centered = draws.rowwise() - mean;
  return SymMatrix((centered.transpose() * centered) / static_cast<double>(draws.rows() - 1));
}

Vector default_gradient_steps(const Vector& theta) {
  const double base = std::cbrt(std::numeric_limits<double>::epsilon());
  return theta.cwiseAbs().cwiseMax(1.0) * base;
}

Vector default_hessian_steps(const Vector& theta) {
  const double base = std::pow(std::numeric_limits<double>::epsilon(), 0.25);
  return theta.cwiseAbs().cwiseMax(1.0) * base;
}

Vector numerical_gradient(const ScalarFunction& f, const Vector& theta,
                          std::optional<Vector> steps) {
  const Vector h = steps ? *steps : default_gradient_steps(theta);
  if (h.size() != theta.size()) throw DimensionMismatch("step vector size mismatch");
  Vector grad(theta.size());
  Vector x = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    x[i] = theta[i] + h[i];
    const double up = checked_eval(f, x);
    x[i] = theta[i] - h[i];
    const double down = checked_eval(f, x);
    x[i] = theta[i];
    grad[i] = (up - down) / (2.0 * h[i]);
  }
  return grad;
}

SymMatrix numerical_hessian(const ScalarFunction& f, const Vector& theta,
                            std::optional<Vector> steps) {
  const Vector h = steps ? *steps : default_hessian_steps(theta);
  if (h.size() != theta.size()) throw DimensionMismatch("step vector size mismatch");
  const Eigen::Index p = theta.size();
  Matrix hess(p, p);
  const double f0 = checked_eval(f, theta);
  Vector x = theta;
  for (Eigen::Index i = 0; i < p; ++i) {
    x[i] = theta[i] + h[i];
    const double up = checked_eval(f, x);
    x[i] = theta[i] - h[i];
    const double down = checked_eval(f, x);
    x[i] = theta[i];
    hess(i, i) = (up - 2.0 * f0 + down) / (h[i] * h[i]);
    for (Eigen::Index j = 0; j < i; ++j) {
      double acc = 0.0;
      for (int si : {1, -1}) {
        for (int sj : {1, -1}) {
          x[i] = theta[i] + si * h[i];
          x[j] = theta[j] + sj * h[j];
          acc += si * sj * checked_eval(f, x);
        }
      }
      x[i] = theta[i];
      x[j] = theta[j];
      hess(i, j) = hess(j, i) = acc / (4.0 * h[i] * h[j]);
    }
  }
  return SymMatrix(hess);
}

double sorted_quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw DomainError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile probability outside [0, 1]");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double empirical_quantile(std::span<const double> samples, double p) {
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  return sorted_quantile(sorted, p);
}

}  // namespace ofs
