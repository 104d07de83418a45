#include "ofs/poisson_demo.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "ofs/errors.hpp"
#include "ofs/rng.hpp"

namespace ofs {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

ParamLayout theta_layout() { return CovarianceFamily::gneiting(true).layout(); }

PriorSpec theta_prior(double scale) {
  PriorSpec p;
  for (const Support s : theta_layout().supports) {
    if (s == Support::unit_interval) {
      p.coordinates.emplace_back(UniformPrior{0.0, 1.0});
    } else {
      p.coordinates.emplace_back(HalfCauchyPrior{scale});
    }
  }
  return p;
}

Chain drop_columns(const Chain& chain, Eigen::Index first) {
  Chain out = chain;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = first; i < chain.dim(); ++i) keep.push_back(i);
  out.layout = chain.layout.subset(keep);
  out.draws = chain.draws.rightCols(chain.dim() - first);
  return out;
}

Json block_json(const std::vector<BlockStats>& blocks) {
  Json j = Json::object();
  for (const BlockStats& b : blocks) {
    j[b.id] = {{"proposed", b.proposed},
               {"accepted", b.accepted},
               {"acceptance_rate", b.proposed ? Json(static_cast<double>(b.accepted) / b.proposed) : Json(nullptr)},
               {"support_violations", b.support_violations}};
  }
  return j;
}

}  // namespace

PoissonDemoConfig PoissonDemoConfig::defaults() {
  PoissonDemoConfig c;
  c.theta = Vector(5);
  c.theta << 1.0, 0.001, 0.5, 0.5, 0.1;
  c.beta = Vector(2);
  c.beta << 1.0, 0.5;
  return c;
}

void PoissonDemoConfig::validate() const {
  if (sites < 10) throw ConfigError("the demo needs at least 10 sites");
  if (!(domain > 0.0) || !(time_span > 0.0)) throw ConfigError("domain and time span must be positive");
  if (theta.size() != 5) throw ConfigError("theta must be (sigma2, a, c, omega, nugget)");
  try {
    CovarianceFamily::gneiting(true).validate(theta);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("invalid theta: ") + e.what());
  }
  if (beta.size() < 1) throw ConfigError("beta needs at least an intercept");
  if (!(spatial_range > 0.0) || !(temporal_range > 0.0) || !(prior_scale > 0.0)) {
    throw ConfigError("taper ranges and prior scale must be positive");
  }
  if (iterations < 1 || burn_in < 0 || burn_in >= iterations || thin < 1) {
    throw ConfigError("invalid chain settings");
  }
  if (exclude) {
    const ParamLayout l = theta_layout();
    for (const std::string& name : *exclude) {
      if (std::find(l.names.begin(), l.names.end(), name) == l.names.end()) {
        throw ConfigError("unknown coordinate '" + name + "' in exclude");
      }
    }
  }
}

PoissonDemoData simulate_poisson_demo(const PoissonDemoConfig& config) {
  config.validate();
  Rng rng(split_seed(config.seed, 0));
  const Eigen::Index n = config.sites;
  PoissonDemoData d;
  d.locations = Matrix(n, 2);
  d.times = Vector(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d.locations(i, 0) = config.domain * uniform01(rng);
    d.locations(i, 1) = config.domain * uniform01(rng);
    d.times[i] = config.time_span * uniform01(rng);
  }
  d.covariates = Matrix(n, config.beta.size());
  d.covariates.col(0).setOnes();
  for (Eigen::Index k = 1; k < config.beta.size(); ++k) {
    d.covariates.col(k) = standard_normal_vector(rng, n);
  }
  const Dataset field = simulate_gp(CovarianceFamily::gneiting(true), config.theta, d.locations,
                                    split_seed(config.seed, 1), d.times, d.covariates, config.beta);
  d.log_means = field.replicate(0);
  d.counts = Vector(n);
  Rng count_rng(split_seed(config.seed, 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::poisson_distribution<long> pois(std::exp(d.log_means[i]));
    d.counts[i] = static_cast<double>(pois(count_rng));
  }
  return d;
}

std::vector<Eigen::Index> near_uniform_coordinates(const Chain& chain) {
  std::vector<Eigen::Index> out;
  const double uniform_sd = 1.0 / std::sqrt(12.0);
  for (Eigen::Index i = 0; i < chain.dim(); ++i) {
    if (chain.layout.supports[static_cast<std::size_t>(i)] != Support::unit_interval) continue;
    const auto col = chain.draws.col(i);
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().sum() / std::max<Eigen::Index>(1, col.size() - 1));
    if (sd > 0.8 * uniform_sd) out.push_back(i);
  }
  return out;
}

PoissonDemoResult run_poisson_demo(const PoissonDemoConfig& config) {
  const PoissonDemoData d = simulate_poisson_demo(config);
  const Eigen::Index n = config.sites;
  const Eigen::Index q = config.beta.size();
  const Eigen::Index p = 5;
  const TaperedGp gp(CovarianceFamily::gneiting(true),
                     TaperSpec{config.spatial_range, config.temporal_range, TaperKernel::wendland},
                     d.locations, d.times);
  TaperedFactorCache cache(gp);
  const PriorSpec prior = theta_prior(config.prior_scale);
  const HalfCauchyPrior s2_prior{config.prior_scale};
  const Matrix& x = d.covariates;
  const Vector& y = d.counts;

  // State layout: b (n), beta (q), theta (p), s2_beta.
  const Eigen::Index ib = 0;
  const Eigen::Index ibeta = n;
  const Eigen::Index itheta = n + q;
  const Eigen::Index is2 = n + q + p;
  ParamLayout layout;
  for (Eigen::Index i = 0; i < n; ++i) {
    layout.names.push_back("b" + std::to_string(i + 1));
    layout.supports.push_back(Support::real);
  }
  for (Eigen::Index k = 0; k < q; ++k) {
    layout.names.push_back("beta" + std::to_string(k + 1));
    layout.supports.push_back(Support::real);
  }
  const ParamLayout tl = theta_layout();
  layout.names.insert(layout.names.end(), tl.names.begin(), tl.names.end());
  layout.supports.insert(layout.supports.end(), tl.supports.begin(), tl.supports.end());
  layout.names.push_back("sigma2_beta");
  layout.supports.push_back(Support::positive);

  const auto theta_ok = [&](const Vector& t) { return tl.contains(t); };
  const auto field_loglik = [&](const Vector& theta, const Vector& b, const Vector& beta) {
    return gp.loglik(cache.get(theta), b - x * beta);
  };

  // Starting values: b from the counts, beta by least squares, theta from the
  // residual variance and the taper ranges. Maximizing the field likelihood
  // at these b is unreliable: it tends to run a or omega onto the boundary.
  const Vector b0 = (y.array() + 0.5).log().matrix();
  const Vector beta0 = (x.transpose() * x).ldlt().solve(x.transpose() * b0);
  const Vector r0 = b0 - x * beta0;
  const double v0 = r0.squaredNorm() / static_cast<double>(n);
  Vector theta0(p);
  theta0 << 0.8 * v0, 4.0 / (config.temporal_range * config.temporal_range),
      0.8 * v0 * 2.0 / config.spatial_range, 0.5, 0.2 * v0;
  const double s20 = std::max(1.0, beta0.squaredNorm() / static_cast<double>(q));

  // b proposal: inverse of diag(exp(b)) + B at the starting values.
  Matrix b_prec = gp.tapered_precision(theta0).to_dense();
  b_prec.diagonal() += b0.array().exp().matrix();
  const Matrix b_prop = (2.38 * 2.38 / static_cast<double>(n)) *
                        b_prec.llt().solve(Matrix::Identity(n, n));

  std::vector<GibbsBlockSpec> blocks(4);
  GibbsBlockSpec& bb = blocks[0];
  bb.id = "b";
  for (Eigen::Index i = 0; i < n; ++i) bb.coordinates.push_back(ib + i);
  bb.proposal_cov = b_prop;
  bb.log_conditional = [&](const Vector& s) {
    const Vector b = s.segment(ib, n);
    const double pois = (y.array() * b.array() - b.array().exp()).sum();
    return pois + field_loglik(s.segment(itheta, p), b, s.segment(ibeta, q));
  };

  GibbsBlockSpec& betab = blocks[1];
  betab.id = "beta";
  betab.kind = BlockKind::conjugate;
  for (Eigen::Index k = 0; k < q; ++k) betab.coordinates.push_back(ibeta + k);
  betab.conditional = [&](const Vector& s) {
    const TaperedFactor& f = cache.get(s.segment(itheta, p));
    Matrix bx(n, q);
    for (Eigen::Index k = 0; k < q; ++k) bx.col(k) = gp.precision_multiply(f, x.col(k));
    Matrix prec = x.transpose() * bx;
    prec.diagonal().array() += 1.0 / s[is2];
    Eigen::LLT<Matrix> llt(prec);
    if (llt.info() != Eigen::Success) throw DomainError("beta conditional precision is not positive definite");
    GaussianConditional c;
    c.cov = llt.solve(Matrix::Identity(q, q));
    c.mean = llt.solve(bx.transpose() * s.segment(ib, n));
    return c;
  };

  GibbsBlockSpec& thetab = blocks[2];
  thetab.id = "theta";
  thetab.quasi = true;
  for (Eigen::Index k = 0; k < p; ++k) thetab.coordinates.push_back(itheta + k);
  thetab.log_conditional = [&](const Vector& s) {
    const Vector t = s.segment(itheta, p);
    if (!theta_ok(t)) return kNegInf;
    return field_loglik(t, s.segment(ib, n), s.segment(ibeta, q)) + log_prior(prior, t);
  };
  Vector theta_sd = 0.1 * theta0;
  theta_sd[3] = 0.1;
  thetab.proposal_cov = theta_sd.array().square().matrix().asDiagonal();

  GibbsBlockSpec& s2b = blocks[3];
  s2b.id = "sigma2_beta";
  s2b.coordinates.push_back(is2);
  s2b.log_conditional = [&](const Vector& s) {
    const double s2 = s[is2];
    if (!(s2 > 0.0)) return kNegInf;
    const Vector beta = s.segment(ibeta, q);
    return -0.5 * static_cast<double>(q) * std::log(s2) - 0.5 * beta.squaredNorm() / s2 +
           log_prior_density(s2_prior, s2);
  };
  s2b.proposal_cov = Matrix::Constant(1, 1, std::pow(0.5 * s20, 2));

  GibbsConfig gcfg;
  gcfg.iterations = config.iterations;
  gcfg.burn_in = config.burn_in;
  gcfg.thin = config.thin;
  gcfg.adapt = config.adapt;
  gcfg.seed = split_seed(config.seed, 3);
  gcfg.initial = Vector(layout.size());
  gcfg.initial << b0, beta0, theta0, s20;

  const GibbsResult raw = gibbs_run(blocks, layout, gcfg);

  // Marginal theta adjustment from plug-in P and Q at the quasi-posterior mean.
  Matrix theta_draws = raw.chain.draws.middleCols(itheta, p);
  Chain theta_chain = raw.chain;
  theta_chain.layout = tl;
  theta_chain.draws = theta_draws;
  const ParamVec center = quasi_bayes_estimate(theta_chain);
  std::vector<Eigen::Index> excluded;
  if (config.exclude) {
    for (const std::string& name : *config.exclude) excluded.push_back(tl.index_of(name));
  } else {
    excluded = near_uniform_coordinates(theta_chain);
  }
  const auto [pp, qq] = gp.analytic_pq(center.values());
  const SandwichEstimate est(pp.sym(), qq.sym(), PMethod::plugin, QMethod::plugin,
                             "P and Q plug-in at the quasi-posterior mean");
  const AdjustmentMatrix omega = assemble_omega(est, center, excluded);

  std::vector<std::optional<AdjustmentMatrix>> adj(blocks.size());
  adj[2] = omega;
  GibbsConfig acfg = gcfg;
  acfg.seed = split_seed(config.seed, 4);
  // Continue from the end of the first pass; the burn-in start can sit where
  // the adjusted values leave the support.
  acfg.initial = raw.chain.draws.bottomRows(1).transpose();
  const GibbsResult adjusted = marginal_ofs_gibbs(blocks, adj, layout, acfg);

  PoissonDemoResult res{drop_columns(raw.chain, n), drop_columns(adjusted.chain, n),
                        raw.blocks, adjusted.blocks, omega, {}, Json::object()};
  res.adjusted.adjusted = Adjustment::ofs;
  for (Eigen::Index k : excluded) res.excluded.push_back(tl.names[static_cast<std::size_t>(k)]);

  Json& s = res.summary;
  s["sites"] = n;
  s["fill_fraction"] = gp.fill_fraction();
  s["mean_count"] = y.mean();
  s["truth"] = {{"theta", vector_to_json(config.theta)}, {"beta", vector_to_json(config.beta)}};
  s["raw"] = {{"blocks", block_json(raw.blocks)}, {"support_violations", raw.chain.support_violations}};
  s["adjusted"] = {{"blocks", block_json(adjusted.blocks)},
                   {"support_violations", adjusted.chain.support_violations}};
  s["excluded"] = res.excluded;
  s["omega"] = adjustment_to_json(omega);

  Json beta_rows = Json::array();
  for (Eigen::Index k = 0; k < q; ++k) {
    for (const auto& [label, chain] : {std::pair<const char*, const Chain*>{"raw", &res.raw},
                                       {"adjusted", &res.adjusted}}) {
      const auto col = chain->draws.col(k);
      const double mean = col.mean();
      const double sd = std::sqrt((col.array() - mean).square().sum() / (col.size() - 1));
      beta_rows.push_back({{"coordinate", chain->layout.names[static_cast<std::size_t>(k)]},
                           {"run", label},
                           {"truth", config.beta[k]},
                           {"mean", mean},
                           {"sd", sd},
                           {"z", (mean - config.beta[k]) / sd}});
    }
  }
  s["beta"] = beta_rows;

  Json widths = Json::array();
  for (Eigen::Index k = 0; k < p; ++k) {
    const CredibleInterval r = credible_interval(res.raw, q + k, 0.10);
    const CredibleInterval a = credible_interval(res.adjusted, q + k, 0.10);
    widths.push_back({{"coordinate", tl.names[static_cast<std::size_t>(k)]},
                      {"truth", config.theta[k]},
                      {"raw", {r.lo, r.hi}},
                      {"adjusted", {a.lo, a.hi}},
                      {"width_ratio", a.width() / r.width()}});
  }
  s["theta_intervals_90"] = widths;
  return res;
}

}  // namespace ofs
