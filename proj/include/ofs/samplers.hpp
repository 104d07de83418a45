#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ofs/chain.hpp"
#include "ofs/model.hpp"
#include "ofs/rng.hpp"
#include "ofs/sandwich.hpp"

namespace ofs {

using LogDensity = std::function<double(const Vector&)>;

/// Default acceptance target for a block of `dim` coordinates.
double default_target_acceptance(Eigen::Index dim);

/// One Robbins-Monro step on the log proposal scale:
/// log_scale + (recent_acceptance - target) / sqrt(step), step >= 1.
double adapt_proposal(double log_scale, double recent_acceptance, double target, int step);

/// (2.38^2 / p) times the inverse of minus the Hessian of log_target at mode.
Matrix laplace_proposal(const LogDensity& log_target, const Vector& mode);

/// Gaussian random-walk Metropolis on a log density. The proposal covariance
/// is exp(2 s) * config.proposal_cov where s adapts during burn-in and is
/// frozen afterwards.
class MetropolisKernel {
 public:
  MetropolisKernel(Vector initial, const Matrix& proposal_cov, const AdaptConfig& adapt);

  /// Evaluates the target at the current point; throws DomainError when not finite.
  void start(const LogDensity& log_target);
  /// One proposal; returns true on acceptance.
  bool step(const LogDensity& log_target, Rng& rng);
  /// Called once per iteration during burn-in.
  void adapt(int iteration);

  const Vector& state() const { return x_; }
  double log_value() const { return logp_; }
  double log_scale() const { return log_scale_; }
  std::uint64_t proposed() const { return proposed_; }
  std::uint64_t accepted() const { return accepted_; }

  /// Replace the current state, e.g. after another Gibbs block moved.
  void reset_state(Vector x, double logp) {
    x_ = std::move(x);
    logp_ = logp;
  }

 private:
  Vector x_;
  double logp_ = 0.0;
  Matrix chol_;
  AdaptConfig adapt_;
  double target_;
  double log_scale_ = 0.0;
  int window_accepts_ = 0;
  int window_count_ = 0;
  int adapt_steps_ = 0;
  std::uint64_t proposed_ = 0;
  std::uint64_t accepted_ = 0;
};

/// Random-walk Metropolis on log_objective + log_prior.
Chain rw_metropolis(const ObjectiveModel& model, const PriorSpec& prior, const Dataset& data,
                    const ChainConfig& config);

/// Curvature-adjusted Metropolis. The chain moves on theta with target
/// l_M(T(theta)) + log prior(theta), T(theta) = mode + Omega^{-1} (theta - mode),
/// so that its covariance approaches Omega Q^{-1} Omega' = J^{-1}. Proposals
/// whose transform leaves the support are rejected and counted.
Chain curvature_metropolis(const ObjectiveModel& model, const PriorSpec& prior,
                           const Dataset& data, const Vector& mode, const AdjustmentMatrix& omega,
                           const ChainConfig& config);

/// Exact Gaussian full conditional of a conjugate block.
struct GaussianConditional {
  Vector mean;
  Matrix cov;
};

enum class BlockKind { metropolis, conjugate };

struct GibbsBlockSpec {
  std::string id;
  std::vector<Eigen::Index> coordinates;
  BlockKind kind = BlockKind::metropolis;
  /// True when the full conditional involves the quasi-likelihood; only such
  /// blocks are adjusted by the OFS variants.
  bool quasi = false;
  /// Metropolis blocks: log full conditional up to a constant, evaluated at
  /// the full state vector (block coordinates substituted).
  LogDensity log_conditional;
  Matrix proposal_cov;
  /// Conjugate blocks: exact Gaussian conditional given the full state.
  std::function<GaussianConditional(const Vector&)> conditional;
};

struct GibbsConfig {
  int iterations = 12000;
  int burn_in = 2000;
  int thin = 1;
  Vector initial;
  AdaptConfig adapt;
  std::uint64_t seed = 1;
};

/// Per-block results of a Gibbs run.
struct BlockStats {
  std::string id;
  std::uint64_t proposed = 0;
  std::uint64_t accepted = 0;
  std::uint64_t support_violations = 0;
};

struct GibbsResult {
  Chain chain;
  std::vector<BlockStats> blocks;
};

/// Systematic-scan Gibbs sampler. log_values holds the log conditional of the
/// last Metropolis block of each retained scan (NaN when there is none).
GibbsResult gibbs_run(const std::vector<GibbsBlockSpec>& blocks, const ParamLayout& layout,
                      const GibbsConfig& config);

/// Gibbs with fixed per-block OFS adjustments. `adjustments` maps block index
/// to its marginal adjustment; every quasi block needs one. After each
/// Metropolis move of a quasi block the adjusted value center + Omega (raw -
/// center) is recorded and propagated to later conditionals, while the block
/// keeps its raw state for its own Metropolis chain.
GibbsResult marginal_ofs_gibbs(const std::vector<GibbsBlockSpec>& blocks,
                               const std::vector<std::optional<AdjustmentMatrix>>& adjustments,
                               const ParamLayout& layout, const GibbsConfig& config);

/// Re-estimates a block adjustment at every scan: estimator(block, state,
/// iteration) returns the adjustment to apply given the current state.
using OmegaEstimator =
    std::function<AdjustmentMatrix(std::size_t block, const Vector& state, int iteration)>;

struct ConditionalOfsOptions {
  /// Must be set explicitly: each scan runs an optimization per quasi block.
  bool allow_expensive = false;
};

GibbsResult conditional_ofs_gibbs(const std::vector<GibbsBlockSpec>& blocks,
                                  const ParamLayout& layout, const GibbsConfig& config,
                                  const OmegaEstimator& estimator,
                                  const ConditionalOfsOptions& options);

/// Coordinatewise mean of the retained draws.
ParamVec quasi_bayes_estimate(const Chain& chain);

}  // namespace ofs
