#pragma once

#include <cstdint>
#include <vector>

#include "ofs/gp_taper.hpp"
#include "ofs/model.hpp"

namespace ofs {

struct SitePair {
  int i;
  int j;
  double lag;
};

/// Pairwise composite likelihood of a replicated, mean-zero Gaussian field:
/// the sum over replicates and over unordered site pairs (i < j, each pair
/// once) of bivariate normal log densities with covariance
/// [[C(0), C(h_ij)], [C(h_ij), C(0)]].
///
/// Data: observations are replicates x sites.
class PairwiseModel final : public ObjectiveModel {
 public:
  /// `replicates` is the number of fields drawn by simulate().
  PairwiseModel(CovarianceFamily family, Matrix locations, Eigen::Index replicates);

  std::string name() const override { return "pairwise_gaussian"; }
  const ParamLayout& layout() const override { return family_.layout(); }
  Capabilities capabilities() const override { return {true, false, false, true}; }

  double log_objective(const Vector& theta, const Dataset& data) const override;
  Vector score(const Vector& theta, const Dataset& data, Eigen::Index replicate) const override;
  Dataset simulate(const Vector& theta, std::uint64_t seed) const override;

  const CovarianceFamily& family() const { return family_; }
  const Matrix& locations() const { return locations_; }
  const std::vector<SitePair>& pairs() const { return pairs_; }
  Eigen::Index site_count() const { return locations_.rows(); }
  Eigen::Index replicates() const { return replicates_; }

  /// Number of pairs each site takes part in.
  std::vector<int> site_pair_counts() const;

 private:
  void check_data(const Dataset& data) const;
  // Bivariate log density summed over `count` replicates, from the
  // sufficient statistics u = sum(y_i^2 + y_j^2) and v = sum(y_i y_j).
  static double pair_term(double c0, double c1, double count, double u, double v);
  // Partial derivatives of pair_term with respect to c0 and c1.
  static std::pair<double, double> pair_term_derivative(double c0, double c1, double count,
                                                        double u, double v);

  CovarianceFamily family_;
  Matrix locations_;
  Eigen::Index replicates_;
  std::vector<SitePair> pairs_;
};

double pairwise_loglik(const PairwiseModel& model, const Vector& theta, const Dataset& data);

/// Analytic gradient of the pairwise log-likelihood of one replicate.
Vector pairwise_score(const PairwiseModel& model, const Vector& theta, const Dataset& data,
                      Eigen::Index replicate);

/// R independent mean-zero fields y_r = L z_r, L the Cholesky factor of the
/// site covariance, drawn in order from one generator seeded with `seed`.
Dataset simulate_replicates(const CovarianceFamily& family, const Vector& theta,
                            const Matrix& locations, Eigen::Index replicates, std::uint64_t seed);

}  // namespace ofs
