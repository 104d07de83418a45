#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ofs/chain.hpp"
#include "ofs/linalg.hpp"
#include "ofs/model.hpp"

namespace ofs {

enum class PMethod { moment, plugin, bootstrap };
enum class QMethod { chain_cov, hessian, plugin };

std::string to_string(PMethod m);
std::string to_string(QMethod m);
PMethod p_method_from_string(const std::string& s);
QMethod q_method_from_string(const std::string& s);

/// P-hat and Q-hat on the total-data scale.
struct SandwichEstimate {
  SandwichEstimate(const SymMatrix& p, const SymMatrix& q, PMethod p_method, QMethod q_method,
                   std::string provenance = {});

  SpdMatrix p_hat;
  SpdMatrix q_hat;
  PMethod p_method;
  QMethod q_method;
  std::string scale = "total_data";
  std::string provenance;
};

/// Omega = Q^{-1} P^{1/2} Q^{1/2} with the center it is applied around.
/// Excluded coordinates are left unadjusted (identity rows and columns).
struct AdjustmentMatrix {
  Matrix omega;
  std::optional<SandwichEstimate> source;
  ParamVec center;
  std::vector<Eigen::Index> excluded;

  Eigen::Index dim() const { return omega.rows(); }
  bool is_identity() const;
  Vector apply(const Vector& theta) const;
};

struct CredibleInterval {
  std::string coordinate;
  double level;
  double lo;
  double hi;

  bool contains(double x) const { return lo <= x && x <= hi; }
  double width() const { return hi - lo; }
};

/// Q_I: inverse sample covariance of an unadjusted chain.
SpdMatrix q_from_chain(const Chain& chain);

/// Q_II: minus the numerical Hessian of the log-objective at theta.
SpdMatrix q_from_hessian(const ObjectiveModel& model, const Dataset& data, const Vector& theta,
                         std::optional<Vector> steps = std::nullopt);

/// Q_III and P_II: the model's analytic formulas at theta.
SpdMatrix q_plugin(const ObjectiveModel& model, const Vector& theta);
SpdMatrix p_plugin(const ObjectiveModel& model, const Vector& theta);

/// P_I: n times the mean outer product of replicate scores at theta.
SymMatrix p_moment(const ObjectiveModel& model, const Dataset& data, const Vector& theta);

/// P_boot: (1/K) sum g_k g_k' over K datasets simulated at theta, g_k the
/// full-data gradient. Replicate k uses split_seed(seed, k).
SymMatrix p_bootstrap(const ObjectiveModel& model, const Vector& theta, int k, std::uint64_t seed,
                      unsigned threads = 1);

AdjustmentMatrix assemble_omega(const SandwichEstimate& estimate, const ParamVec& center,
                                const std::vector<Eigen::Index>& excluded = {});

/// Maps every draw to center + Omega (draw - center). Adjusted values outside
/// the support are kept and counted in support_violations.
Chain ofs_adjust(const Chain& chain, const AdjustmentMatrix& omega);

/// Equi-tailed interval between the alpha/2 and 1 - alpha/2 quantiles.
CredibleInterval credible_interval(const Chain& chain, Eigen::Index coordinate, double alpha);

}  // namespace ofs
