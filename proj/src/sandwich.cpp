#include "ofs/sandwich.hpp"

#include <algorithm>
#include <vector>

#include "ofs/errors.hpp"
#include "ofs/parallel.hpp"
#include "ofs/rng.hpp"

namespace ofs {

std::string to_string(PMethod m) {
  switch (m) {
    case PMethod::moment:
      return "moment";
    case PMethod::plugin:
      return "plugin";
    case PMethod::bootstrap:
      return "bootstrap";
  }
  return "?";
}

std::string to_string(QMethod m) {
  switch (m) {
    case QMethod::chain_cov:
      return "chain_cov";
    case QMethod::hessian:
      return "hessian";
    case QMethod::plugin:
      return "plugin";
  }
  return "?";
}

PMethod p_method_from_string(const std::string& s) {
  if (s == "moment") return PMethod::moment;
  if (s == "plugin") return PMethod::plugin;
  if (s == "bootstrap") return PMethod::bootstrap;
  throw ConfigError("unknown P estimator '" + s + "' (expected moment, plugin or bootstrap)");
}

QMethod q_method_from_string(const std::string& s) {
  if (s == "chain_cov") return QMethod::chain_cov;
  if (s == "hessian") return QMethod::hessian;
  if (s == "plugin") return QMethod::plugin;
  throw ConfigError("unknown Q estimator '" + s + "' (expected chain_cov, hessian or plugin)");
}

SandwichEstimate::SandwichEstimate(const SymMatrix& p, const SymMatrix& q, PMethod pm, QMethod qm,
                                   std::string prov)
    : p_hat(p), q_hat(q), p_method(pm), q_method(qm), provenance(std::move(prov)) {
  if (p.dim() != q.dim()) throw DimensionMismatch("P-hat and Q-hat differ in dimension");
}

bool AdjustmentMatrix::is_identity() const {
  return omega.isIdentity(0.0);
}

Vector AdjustmentMatrix::apply(const Vector& theta) const {
  if (theta.size() != dim()) throw DimensionMismatch("draw does not match the adjustment dimension");
  if (is_identity()) return theta;
  const Vector& c = center.values();
  return c + omega * (theta - c);
}

SpdMatrix q_from_chain(const Chain& chain) {
  if (chain.adjusted != Adjustment::raw) {
    throw DomainError("Q_I needs an unadjusted chain; this chain is " + to_string(chain.adjusted));
  }
  if (chain.size() < chain.dim() + 1) {
    throw DomainError("chain has " + std::to_string(chain.size()) + " draws; Q_I needs at least " +
                      std::to_string(chain.dim() + 1));
  }
  return spd_inverse(SpdMatrix(sample_covariance(chain.draws)));
}

SpdMatrix q_from_hessian(const ObjectiveModel& model, const Dataset& data, const Vector& theta,
                         std::optional<Vector> steps) {
  const SymMatrix h = numerical_hessian(
      [&](const Vector& t) { return model.log_objective(t, data); }, theta, std::move(steps));
  return SpdMatrix(Matrix(-h.matrix()));
}

SpdMatrix q_plugin(const ObjectiveModel& model, const Vector& theta) {
  if (!model.capabilities().analytic_q) {
    throw UnsupportedCapability(model.name() + ": Q plug-in estimator needs an analytic Q");
  }
  return model.analytic_q(theta);
}

SpdMatrix p_plugin(const ObjectiveModel& model, const Vector& theta) {
  if (!model.capabilities().analytic_p) {
    throw UnsupportedCapability(model.name() + ": P plug-in estimator needs an analytic P");
  }
  return model.analytic_p(theta);
}

SymMatrix p_moment(const ObjectiveModel& model, const Dataset& data, const Vector& theta) {
  if (!model.capabilities().per_replicate_score) {
    throw UnsupportedCapability(model.name() + ": moment estimator of P needs replicate scores");
  }
  const Eigen::Index n = data.replicate_count();
  if (n < 2) {
    throw DomainError(
        "moment estimator of P needs independent replicates; a single realization of a process "
        "gives no usable estimate");
  }
  const Eigen::Index p = theta.size();
  Matrix acc = Matrix::Zero(p, p);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Vector s = model.score(theta, data, r);
    acc.noalias() += s * s.transpose();
  }
  // (1/n) sum s s' is per replicate; multiply by n for the total-data scale.
  return SymMatrix(acc);
}

SymMatrix p_bootstrap(const ObjectiveModel& model, const Vector& theta, int k, std::uint64_t seed,
                      unsigned threads) {
  if (!model.capabilities().simulate) {
    throw UnsupportedCapability(model.name() + ": bootstrap estimator of P needs a simulator");
  }
  const Eigen::Index p = theta.size();
  if (k < p + 1) {
    throw DomainError("bootstrap needs K >= p + 1 = " + std::to_string(p + 1) + " replicates");
  }
  std::vector<Vector> grads(static_cast<std::size_t>(k));
  parallel_for(grads.size(), threads, [&](std::size_t i) {
    const Dataset sim = model.simulate(theta, split_seed(seed, i));
    grads[i] = model.gradient(theta, sim);
  });
  Matrix acc = Matrix::Zero(p, p);
  for (const Vector& g : grads) acc.noalias() += g * g.transpose();
  return SymMatrix(acc / static_cast<double>(k));
}

AdjustmentMatrix assemble_omega(const SandwichEstimate& estimate, const ParamVec& center,
                                const std::vector<Eigen::Index>& excluded) {
  const Eigen::Index p = estimate.p_hat.dim();
  if (center.size() != p) throw DimensionMismatch("center does not match the sandwich dimension");
  std::vector<Eigen::Index> kept;
  for (Eigen::Index i = 0; i < p; ++i) {
    if (std::find(excluded.begin(), excluded.end(), i) == excluded.end()) kept.push_back(i);
  }
  for (Eigen::Index e : excluded) {
    if (e < 0 || e >= p) throw DimensionMismatch("excluded coordinate out of range");
  }

  Matrix omega = Matrix::Identity(p, p);
  if (!kept.empty()) {
    const auto k = static_cast<Eigen::Index>(kept.size());
    Matrix ps(k, k);
    Matrix qs(k, k);
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index b = 0; b < k; ++b) {
        ps(a, b) = estimate.p_hat(kept[a], kept[b]);
        qs(a, b) = estimate.q_hat(kept[a], kept[b]);
      }
    }
    const SpdMatrix pk(ps);
    const SpdMatrix qk(qs);
    const Matrix sub =
        spd_inverse(qk).matrix() * spd_sqrt(pk).matrix() * spd_sqrt(qk).matrix();
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index b = 0; b < k; ++b) omega(kept[a], kept[b]) = sub(a, b);
    }
  }
  return AdjustmentMatrix{omega, estimate, center, excluded};
}

Chain ofs_adjust(const Chain& chain, const AdjustmentMatrix& omega) {
  if (chain.adjusted != Adjustment::raw) {
    throw DomainError("chain is already adjusted (" + to_string(chain.adjusted) +
                      "); adjusting twice is invalid");
  }
  if (chain.dim() != omega.dim()) {
    throw DimensionMismatch("chain has " + std::to_string(chain.dim()) +
                            " coordinates, adjustment has " + std::to_string(omega.dim()));
  }
  Chain out = chain;
  out.adjusted = Adjustment::ofs;
  out.support_violations = 0;
  for (Eigen::Index j = 0; j < chain.size(); ++j) {
    const Vector adjusted = omega.apply(chain.draws.row(j).transpose());
    out.draws.row(j) = adjusted.transpose();
    if (!chain.layout.contains(adjusted)) ++out.support_violations;
  }
  return out;
}

CredibleInterval credible_interval(const Chain& chain, Eigen::Index coordinate, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  if (coordinate < 0 || coordinate >= chain.dim()) throw DimensionMismatch("no such coordinate");
  std::vector<double> column(chain.draws.col(coordinate).data(),
                             chain.draws.col(coordinate).data() + chain.size());
  std::sort(column.begin(), column.end());
  CredibleInterval ci;
  ci.coordinate = chain.layout.names.at(static_cast<std::size_t>(coordinate));
  ci.level = 1.0 - alpha;
  ci.lo = sorted_quantile(column, alpha / 2.0);
  ci.hi = sorted_quantile(column, 1.0 - alpha / 2.0);
  return ci;
}

}  // namespace ofs
