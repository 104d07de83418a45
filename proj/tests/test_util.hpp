#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ofs/linalg.hpp"
#include "ofs/rng.hpp"

namespace testutil {

using ofs::Matrix;
using ofs::Vector;

inline Matrix random_matrix(ofs::Rng& rng, Eigen::Index r, Eigen::Index c) {
  Matrix m(r, c);
  std::normal_distribution<double> n(0.0, 1.0);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = n(rng);
  }
  return m;
}

inline Matrix random_orthogonal(ofs::Rng& rng, Eigen::Index p) {
  Eigen::HouseholderQR<Matrix> qr(random_matrix(rng, p, p));
  return qr.householderQ();
}

// U diag(eigs) U' with a random orthogonal U.
inline Matrix random_spd(ofs::Rng& rng, const Vector& eigs) {
  const Matrix u = random_orthogonal(rng, eigs.size());
  Matrix a = u * eigs.asDiagonal() * u.transpose();
  return 0.5 * (a + a.transpose());
}

inline Matrix random_spd(ofs::Rng& rng, Eigen::Index p) {
  Vector e(p);
  for (Eigen::Index i = 0; i < p; ++i) e[i] = 0.5 + 2.0 * ofs::uniform01(rng);
  return random_spd(rng, e);
}

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

// Monte Carlo standard error of the mean of a correlated series by batch means.
inline double batch_means_se(const Vector& x, Eigen::Index batches = 50) {
  const Eigen::Index len = x.size() / batches;
  Vector means(batches);
  for (Eigen::Index b = 0; b < batches; ++b) means[b] = x.segment(b * len, len).mean();
  const double m = means.mean();
  const double var = (means.array() - m).square().sum() / static_cast<double>(batches - 1);
  return std::sqrt(var / static_cast<double>(batches));
}

// Two-sample Kolmogorov-Smirnov statistic and its asymptotic p-value.
struct KsResult {
  double d;
  double p_value;
};

inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = na * nb / (na + nb);
  const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  // Kolmogorov distribution tail; the series is useless near 0 where p = 1.
  if (lambda < 0.2) return {d, 1.0};
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  }
  return {d, std::clamp(p, 0.0, 1.0)};
}

}  // namespace testutil
