#pragma once

// Dense reference constructions written from the formulas, sharing no code
// with the library. Used as differential oracles.

#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>

#include "ofs/linalg.hpp"

namespace dense_ref {

using ofs::Matrix;
using ofs::Vector;

inline const double kLog2Pi = std::log(2.0 * std::numbers::pi);

inline double exp_cov(double s2, double c, double h) { return s2 * std::exp(-(c / s2) * h); }

inline double wendland(double d, double r) {
  if (d >= r) return 0.0;
  const double x = d / r;
  return std::pow(1.0 - x, 4) * (4.0 * x + 1.0);
}

inline double dist(const Matrix& locs, Eigen::Index i, Eigen::Index j) { return (locs.row(i) - locs.row(j)).norm(); }

inline Matrix sigma(double s2, double c, const Matrix& locs) {
  const Eigen::Index n = locs.rows();
  Matrix s(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) s(i, j) = exp_cov(s2, c, dist(locs, i, j));
  return s;
}

inline Matrix taper(double r, const Matrix& locs) {
  const Eigen::Index n = locs.rows();
  Matrix t(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) t(i, j) = wendland(dist(locs, i, j), r);
  return t;
}

// Two-taper likelihood: -1/2 log|S o T| - 1/2 y' [(S o T)^{-1} o T] y.
inline double tapered(const Matrix& sig, const Matrix& tap, const Vector& y) {
  const Matrix a = sig.cwiseProduct(tap);
  Eigen::LLT<Matrix> llt(a);
  const Matrix l = llt.matrixL();
  const double logdet = 2.0 * l.diagonal().array().log().sum();
  const Matrix b = llt.solve(Matrix::Identity(a.rows(), a.cols())).cwiseProduct(tap);
  return -0.5 * static_cast<double>(y.size()) * kLog2Pi - 0.5 * logdet - 0.5 * y.dot(b * y);
}

inline double bivariate_normal(double c0, double c1, double a, double b) {
  const double det = c0 * c0 - c1 * c1;
  return -kLog2Pi - 0.5 * std::log(det) - 0.5 * (c0 * a * a - 2.0 * c1 * a * b + c0 * b * b) / det;
}

// Exponential-covariance pairwise likelihood, replicates x sites x sites.
inline double pairwise(const Vector& theta, const Matrix& locs, const Matrix& y) {
  double total = 0.0;
  for (Eigen::Index r = 0; r < y.rows(); ++r)
    for (Eigen::Index i = 0; i < locs.rows(); ++i)
      for (Eigen::Index j = i + 1; j < locs.rows(); ++j)
        total += bivariate_normal(theta[0], exp_cov(theta[0], theta[1], dist(locs, i, j)), y(r, i), y(r, j));
  return total;
}

}  // namespace dense_ref
