#include "ofs/samplers.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "ofs/errors.hpp"

namespace ofs {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Matrix proposal_factor(const Matrix& cov, const std::string& what) {
  if (cov.rows() == 0 || cov.rows() != cov.cols() || !cov.allFinite()) {
    throw ConfigError(what + ": proposal covariance must be a finite square matrix");
  }
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw ConfigError(what + ": proposal covariance is not positive definite");
  }
  return llt.matrixL();
}

bool keep_iteration(int i, int burn_in, int thin) {
  return i >= burn_in && (i - burn_in) % thin == 0;
}

ChainConfig echo(const GibbsConfig& g) {
  ChainConfig c;
  c.iterations = g.iterations;
  c.burn_in = g.burn_in;
  c.thin = g.thin;
  c.initial = g.initial;
  c.adapt = g.adapt;
  c.seed = g.seed;
  return c;
}

Chain run_kernel(const LogDensity& target, const ParamLayout& layout, const ChainConfig& config,
                 Adjustment flag) {
  config.validate(layout.size());
  if (!layout.contains(config.initial)) throw DomainError("initial point is outside the support");
  MetropolisKernel kernel(config.initial, config.proposal_cov, config.adapt);
  kernel.start(target);
  Rng rng(config.seed);

  Chain chain;
  chain.layout = layout;
  chain.config = config;
  chain.adjusted = flag;
  const int kept = config.kept_count();
  chain.draws.resize(kept, layout.size());
  chain.log_values.resize(kept);
  int row = 0;
  for (int i = 0; i < config.iterations; ++i) {
    kernel.step(target, rng);
    if (i < config.burn_in) kernel.adapt(i);
    if (keep_iteration(i, config.burn_in, config.thin)) {
      chain.draws.row(row) = kernel.state().transpose();
      chain.log_values[row] = kernel.log_value();
      ++row;
    }
  }
  chain.proposed = kernel.proposed();
  chain.accepted = kernel.accepted();
  chain.acceptance_rate =
      static_cast<double>(chain.accepted) / static_cast<double>(std::max<std::uint64_t>(1, chain.proposed));
  return chain;
}

}  // namespace

double default_target_acceptance(Eigen::Index dim) { return dim == 1 ? 0.44 : 0.234; }

double adapt_proposal(double log_scale, double recent_acceptance, double target, int step) {
  return log_scale + (recent_acceptance - target) / std::sqrt(static_cast<double>(std::max(step, 1)));
}

Matrix laplace_proposal(const LogDensity& log_target, const Vector& mode) {
  const SymMatrix h = numerical_hessian(log_target, mode);
  const SpdMatrix neg(Matrix(-h.matrix()));
  const double p = static_cast<double>(mode.size());
  return (2.38 * 2.38 / p) * spd_inverse(neg).matrix();
}

MetropolisKernel::MetropolisKernel(Vector initial, const Matrix& proposal_cov,
                                   const AdaptConfig& adapt)
    : x_(std::move(initial)),
      chol_(proposal_factor(proposal_cov, "Metropolis kernel")),
      adapt_(adapt),
      target_(adapt.target_acceptance > 0.0 ? adapt.target_acceptance
                                            : default_target_acceptance(x_.size())) {
  if (chol_.rows() != x_.size()) throw DimensionMismatch("proposal and state dimensions differ");
}

void MetropolisKernel::start(const LogDensity& log_target) {
  logp_ = log_target(x_);
  if (!std::isfinite(logp_)) {
    throw DomainError("initial point has a non-finite log target (" + std::to_string(logp_) + ")");
  }
}

bool MetropolisKernel::step(const LogDensity& log_target, Rng& rng) {
  const Vector z = standard_normal_vector(rng, x_.size());
  const double u = uniform01(rng);
  Vector proposal = x_ + std::exp(log_scale_) * (chol_ * z);
  const double lp = log_target(proposal);
  ++proposed_;
  ++window_count_;
  const bool accept = lp > kNegInf && std::log(u) < lp - logp_;
  if (accept) {
    x_ = std::move(proposal);
    logp_ = lp;
    ++accepted_;
    ++window_accepts_;
  }
  return accept;
}

void MetropolisKernel::adapt(int iteration) {
  if (!adapt_.enabled) {
    window_accepts_ = window_count_ = 0;
    return;
  }
  if (window_count_ < adapt_.window) return;
  if (window_accepts_ == 0) {
    throw DomainError("every proposal was rejected in the adaptation window ending at iteration " +
                      std::to_string(iteration));
  }
  const double rate = static_cast<double>(window_accepts_) / static_cast<double>(window_count_);
  log_scale_ = adapt_proposal(log_scale_, rate, target_, ++adapt_steps_);
  window_accepts_ = window_count_ = 0;
}

Chain rw_metropolis(const ObjectiveModel& model, const PriorSpec& prior, const Dataset& data,
                    const ChainConfig& config) {
  validate_prior(prior, model.layout());
  const LogDensity target = [&](const Vector& t) {
    return log_quasi_posterior(model, prior, t, data);
  };
  return run_kernel(target, model.layout(), config, Adjustment::raw);
}

Chain curvature_metropolis(const ObjectiveModel& model, const PriorSpec& prior,
                           const Dataset& data, const Vector& mode, const AdjustmentMatrix& omega,
                           const ChainConfig& config) {
  validate_prior(prior, model.layout());
  const ParamLayout& layout = model.layout();
  if (omega.dim() != layout.size() || mode.size() != layout.size()) {
    throw DimensionMismatch("curvature adjustment does not match the parameter dimension");
  }
  std::uint64_t violations = 0;
  LogDensity target;
  if (omega.is_identity()) {
    target = [&](const Vector& t) { return log_quasi_posterior(model, prior, t, data); };
  } else {
    Eigen::PartialPivLU<Matrix> lu(omega.omega);
    const Matrix inverse = lu.inverse();
    if (!inverse.allFinite()) throw DomainError("curvature adjustment matrix is singular");
    target = [&, inverse](const Vector& t) {
      if (!layout.contains(t)) return kNegInf;
      const double lp = log_prior(prior, t);
      if (lp == kNegInf) return kNegInf;
      const Vector moved = mode + inverse * (t - mode);
      if (!layout.contains(moved)) {
        ++violations;
        return kNegInf;
      }
      const double lo = model.log_objective(moved, data);
      if (!std::isfinite(lo)) {
        throw DomainError(model.name() + ": non-finite log-objective at an in-support parameter");
      }
      return lo + lp;
    };
  }
  Chain chain = run_kernel(target, layout, config, Adjustment::curvature);
  chain.support_violations = violations;
  return chain;
}

namespace {

using AdjustmentProvider =
    std::function<const AdjustmentMatrix*(std::size_t block, const Vector& state, int iteration)>;

void check_partition(const std::vector<GibbsBlockSpec>& blocks, const ParamLayout& layout) {
  std::vector<int> seen(static_cast<std::size_t>(layout.size()), 0);
  for (const GibbsBlockSpec& b : blocks) {
    if (b.coordinates.empty()) throw ConfigError("block '" + b.id + "' covers no coordinates");
    for (Eigen::Index c : b.coordinates) {
      if (c < 0 || c >= layout.size()) throw ConfigError("block '" + b.id + "' coordinate out of range");
      ++seen[static_cast<std::size_t>(c)];
    }
    if (b.kind == BlockKind::metropolis && !b.log_conditional) {
      throw ConfigError("Metropolis block '" + b.id + "' has no log conditional");
    }
    if (b.kind == BlockKind::conjugate && !b.conditional) {
      throw ConfigError("conjugate block '" + b.id + "' has no conditional");
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (seen[i] != 1) {
      throw ConfigError("blocks must partition the parameter; coordinate '" + layout.names[i] +
                        "' is covered " + std::to_string(seen[i]) + " times");
    }
  }
}

Vector gather(const Vector& full, const std::vector<Eigen::Index>& coords) {
  Vector out(static_cast<Eigen::Index>(coords.size()));
  for (std::size_t k = 0; k < coords.size(); ++k) out[static_cast<Eigen::Index>(k)] = full[coords[k]];
  return out;
}

void scatter(Vector& full, const std::vector<Eigen::Index>& coords, const Vector& part) {
  for (std::size_t k = 0; k < coords.size(); ++k) full[coords[k]] = part[static_cast<Eigen::Index>(k)];
}

GibbsResult gibbs_impl(const std::vector<GibbsBlockSpec>& blocks, const ParamLayout& layout,
                       const GibbsConfig& config, const AdjustmentProvider& provider,
                       Adjustment flag) {
  check_partition(blocks, layout);
  if (config.iterations < 1 || config.burn_in < 0 || config.burn_in >= config.iterations ||
      config.thin < 1) {
    throw ConfigError("invalid Gibbs iteration settings");
  }
  if (config.initial.size() != layout.size() || !layout.contains(config.initial)) {
    throw DomainError("Gibbs initial point is missing or outside the support");
  }

  const std::size_t nb = blocks.size();
  std::vector<std::optional<MetropolisKernel>> kernels(nb);
  std::vector<ParamLayout> block_layouts(nb);
  std::vector<LogDensity> block_targets(nb);
  Vector state = config.initial;
  std::uint64_t version = 0;
  std::vector<std::uint64_t> seen_version(nb, std::numeric_limits<std::uint64_t>::max());
  std::vector<BlockStats> stats(nb);

  for (std::size_t b = 0; b < nb; ++b) {
    const GibbsBlockSpec& spec = blocks[b];
    stats[b].id = spec.id;
    block_layouts[b] = layout.subset(spec.coordinates);
    if (spec.kind == BlockKind::metropolis) {
      kernels[b].emplace(gather(state, spec.coordinates), spec.proposal_cov, config.adapt);
      block_targets[b] = [&state, &spec](const Vector& xb) {
        Vector full = state;
        scatter(full, spec.coordinates, xb);
        return spec.log_conditional(full);
      };
    }
  }

  Rng rng(config.seed);
  ChainConfig echoed = echo(config);
  Chain chain;
  chain.layout = layout;
  chain.config = echoed;
  chain.adjusted = flag;
  const int kept = echoed.kept_count();
  chain.draws.resize(kept, layout.size());
  chain.log_values.resize(kept);
  int row = 0;
  double last_log = std::numeric_limits<double>::quiet_NaN();

  for (int it = 0; it < config.iterations; ++it) {
    for (std::size_t b = 0; b < nb; ++b) {
      const GibbsBlockSpec& spec = blocks[b];
      if (spec.kind == BlockKind::conjugate) {
        const GaussianConditional cond = spec.conditional(state);
        const auto d = static_cast<Eigen::Index>(spec.coordinates.size());
        if (cond.mean.size() != d || cond.cov.rows() != d || cond.cov.cols() != d) {
          throw DimensionMismatch("conjugate block '" + spec.id + "' returned the wrong dimension");
        }
        Eigen::LLT<Matrix> llt(cond.cov);
        if (llt.info() != Eigen::Success || !cond.cov.allFinite()) {
          throw DomainError("conjugate block '" + spec.id +
                            "': conditional covariance is not positive definite at iteration " +
                            std::to_string(it));
        }
        const Vector draw = cond.mean + llt.matrixL() * standard_normal_vector(rng, d);
        scatter(state, spec.coordinates, draw);
        ++version;
        continue;
      }

      MetropolisKernel& kernel = *kernels[b];
      const AdjustmentMatrix* adj = spec.quasi ? provider(b, state, it) : nullptr;
      if (seen_version[b] != version) {
        const double lp = block_targets[b](kernel.state());
        if (!std::isfinite(lp)) {
          throw DomainError("block '" + spec.id + "' has a non-finite log conditional at iteration " +
                            std::to_string(it));
        }
        kernel.reset_state(kernel.state(), lp);
      }
      const bool accepted = kernel.step(block_targets[b], rng);
      if (adj != nullptr) {
        // The raw kernel always moves on; an adjusted value outside the
        // support is refused and the block keeps its previous value.
        const Vector current = gather(state, spec.coordinates);
        Vector value = adj->apply(kernel.state());
        if (!block_layouts[b].contains(value)) {
          ++stats[b].support_violations;
          value = current;
        }
        if (value != current) {
          scatter(state, spec.coordinates, value);
          ++version;
        }
      } else if (accepted) {
        scatter(state, spec.coordinates, kernel.state());
        ++version;
      }
      seen_version[b] = version;
      if (it < config.burn_in) {
        try {
          kernel.adapt(it);
        } catch (const DomainError& e) {
          throw DomainError("block '" + spec.id + "': " + e.what());
        }
      }
      last_log = kernel.log_value();
    }
    if (keep_iteration(it, config.burn_in, config.thin)) {
      chain.draws.row(row) = state.transpose();
      chain.log_values[row] = last_log;
      ++row;
    }
  }

  for (std::size_t b = 0; b < nb; ++b) {
    if (kernels[b]) {
      stats[b].proposed = kernels[b]->proposed();
      stats[b].accepted = kernels[b]->accepted();
      chain.proposed += stats[b].proposed;
      chain.accepted += stats[b].accepted;
    }
    chain.support_violations += stats[b].support_violations;
  }
  chain.acceptance_rate = chain.proposed == 0 ? 1.0
                                              : static_cast<double>(chain.accepted) /
                                                    static_cast<double>(chain.proposed);
  return GibbsResult{std::move(chain), std::move(stats)};
}

}  // namespace

GibbsResult gibbs_run(const std::vector<GibbsBlockSpec>& blocks, const ParamLayout& layout,
                      const GibbsConfig& config) {
  return gibbs_impl(
      blocks, layout, config, [](std::size_t, const Vector&, int) -> const AdjustmentMatrix* {
        return nullptr;
      },
      Adjustment::raw);
}

GibbsResult marginal_ofs_gibbs(const std::vector<GibbsBlockSpec>& blocks,
                               const std::vector<std::optional<AdjustmentMatrix>>& adjustments,
                               const ParamLayout& layout, const GibbsConfig& config) {
  if (adjustments.size() != blocks.size()) {
    throw ConfigError("one (possibly empty) adjustment per block is required");
  }
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (!blocks[b].quasi) continue;
    if (blocks[b].kind != BlockKind::metropolis) {
      throw ConfigError("quasi block '" + blocks[b].id + "' must be a Metropolis block");
    }
    if (!adjustments[b]) {
      throw ConfigError("quasi block '" + blocks[b].id + "' has no adjustment matrix");
    }
    if (adjustments[b]->dim() != static_cast<Eigen::Index>(blocks[b].coordinates.size())) {
      throw DimensionMismatch("adjustment for block '" + blocks[b].id + "' has the wrong dimension");
    }
  }
  return gibbs_impl(
      blocks, layout, config,
      [&](std::size_t b, const Vector&, int) -> const AdjustmentMatrix* {
        return &*adjustments[b];
      },
      Adjustment::ofs);
}

GibbsResult conditional_ofs_gibbs(const std::vector<GibbsBlockSpec>& blocks,
                                  const ParamLayout& layout, const GibbsConfig& config,
                                  const OmegaEstimator& estimator,
                                  const ConditionalOfsOptions& options) {
  if (!options.allow_expensive) {
    throw ConfigError(
        "conditional OFS re-estimates the adjustment at every scan; set allow_expensive to run it");
  }
  for (const GibbsBlockSpec& b : blocks) {
    if (b.quasi && b.kind != BlockKind::metropolis) {
      throw ConfigError("quasi block '" + b.id + "' must be a Metropolis block");
    }
  }
  std::vector<std::optional<AdjustmentMatrix>> current(blocks.size());
  return gibbs_impl(
      blocks, layout, config,
      [&](std::size_t b, const Vector& state, int it) -> const AdjustmentMatrix* {
        try {
          current[b] = estimator(b, state, it);
        } catch (const std::exception& e) {
          throw DomainError("adjustment estimate for block '" + blocks[b].id +
                            "' failed at iteration " + std::to_string(it) + ": " + e.what());
        }
        if (current[b]->dim() != static_cast<Eigen::Index>(blocks[b].coordinates.size())) {
          throw DimensionMismatch("estimated adjustment for block '" + blocks[b].id +
                                  "' has the wrong dimension");
        }
        return &*current[b];
      },
      Adjustment::ofs);
}

ParamVec quasi_bayes_estimate(const Chain& chain) {
  if (chain.size() == 0) throw DomainError("quasi-Bayes estimate of an empty chain");
  return ParamVec(chain.layout, chain.draws.colwise().mean().transpose());
}

}  // namespace ofs
