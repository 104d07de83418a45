#include "ofs/pairwise.hpp"

#include <cmath>

#include <Eigen/Cholesky>

#include "ofs/errors.hpp"
#include "ofs/rng.hpp"

namespace ofs {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

PairwiseModel::PairwiseModel(CovarianceFamily family, Matrix locations, Eigen::Index replicates)
    : family_(std::move(family)), locations_(std::move(locations)), replicates_(replicates) {
  if (locations_.rows() < 2 || locations_.cols() != 2) {
    throw DimensionMismatch("pairwise likelihood needs at least two sites with (x, y) coordinates");
  }
  if (replicates_ < 1) throw DomainError("replicate count must be at least 1");
  const auto m = static_cast<int>(locations_.rows());
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      pairs_.push_back({i, j, (locations_.row(i) - locations_.row(j)).norm()});
    }
  }
}

std::vector<int> PairwiseModel::site_pair_counts() const {
  std::vector<int> counts(static_cast<std::size_t>(site_count()), 0);
  for (const SitePair& p : pairs_) {
    ++counts[static_cast<std::size_t>(p.i)];
    ++counts[static_cast<std::size_t>(p.j)];
  }
  return counts;
}

void PairwiseModel::check_data(const Dataset& data) const {
  if (data.location_count() != site_count() || data.replicate_count() < 1) {
    throw DimensionMismatch("dataset has " + std::to_string(data.location_count()) +
                            " sites, model has " + std::to_string(site_count()));
  }
}

double PairwiseModel::pair_term(double c0, double c1, double count, double u, double v) {
  const double det = c0 * c0 - c1 * c1;
  if (!(det > 0.0)) throw DomainError("bivariate covariance block is not positive definite");
  return -count * kLog2Pi - 0.5 * count * std::log(det) - (c0 * u - 2.0 * c1 * v) / (2.0 * det);
}

std::pair<double, double> PairwiseModel::pair_term_derivative(double c0, double c1, double count,
                                                              double u, double v) {
  const double det = c0 * c0 - c1 * c1;
  const double quad = c0 * u - 2.0 * c1 * v;
  const double d2 = 2.0 * det * det;
  const double d_c0 = -count * c0 / det - (u * det - 2.0 * c0 * quad) / d2;
  const double d_c1 = count * c1 / det - (-2.0 * v * det + 2.0 * c1 * quad) / d2;
  return {d_c0, d_c1};
}

double PairwiseModel::log_objective(const Vector& theta, const Dataset& data) const {
  check_data(data);
  family_.validate(theta);
  const Matrix gram = data.observations.transpose() * data.observations;
  const auto count = static_cast<double>(data.replicate_count());
  const double c0 = family_.value(theta, 0.0, 0.0) + family_.nugget(theta);
  double total = 0.0;
  for (const SitePair& p : pairs_) {
    const double c1 = family_.value(theta, p.lag, 0.0);
    total += pair_term(c0, c1, count, gram(p.i, p.i) + gram(p.j, p.j), gram(p.i, p.j));
  }
  return total;
}

Vector PairwiseModel::score(const Vector& theta, const Dataset& data, Eigen::Index r) const {
  check_data(data);
  family_.validate(theta);
  if (r < 0 || r >= data.replicate_count()) throw DomainError("replicate index out of range");
  const Eigen::Index np = family_.parameter_count();
  Vector dc0(np);
  Vector dc1(np);
  family_.gradient(theta, 0.0, 0.0, dc0.data());
  if (family_.has_nugget()) dc0[family_.nugget_index()] = 1.0;
  const double c0 = family_.value(theta, 0.0, 0.0) + family_.nugget(theta);
  const auto y = data.observations.row(r);
  Vector grad = Vector::Zero(np);
  for (const SitePair& p : pairs_) {
    const double c1 = family_.value(theta, p.lag, 0.0);
    family_.gradient(theta, p.lag, 0.0, dc1.data());
    const double a = y[p.i];
    const double b = y[p.j];
    const auto [g0, g1] = pair_term_derivative(c0, c1, 1.0, a * a + b * b, a * b);
    grad += g0 * dc0 + g1 * dc1;
  }
  return grad;
}

Dataset PairwiseModel::simulate(const Vector& theta, std::uint64_t seed) const {
  return simulate_replicates(family_, theta, locations_, replicates_, seed);
}

double pairwise_loglik(const PairwiseModel& model, const Vector& theta, const Dataset& data) {
  return model.log_objective(theta, data);
}

Vector pairwise_score(const PairwiseModel& model, const Vector& theta, const Dataset& data,
                      Eigen::Index replicate) {
  return model.score(theta, data, replicate);
}

Dataset simulate_replicates(const CovarianceFamily& family, const Vector& theta,
                            const Matrix& locations, Eigen::Index replicates, std::uint64_t seed) {
  if (replicates < 1) throw DomainError("replicate count must be at least 1");
  const Matrix sigma = covariance_matrix(family, theta, locations);
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) throw DomainError("site covariance is not positive definite");
  const Eigen::Index m = locations.rows();
  Rng rng(seed);
  Dataset d;
  d.observations.resize(replicates, m);
  for (Eigen::Index r = 0; r < replicates; ++r) {
    d.observations.row(r) = (llt.matrixL() * standard_normal_vector(rng, m)).transpose();
  }
  d.locations = locations;
  return d;
}

}  // namespace ofs
