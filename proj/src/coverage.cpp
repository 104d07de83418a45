#include "ofs/coverage.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "ofs/errors.hpp"
#include "ofs/io.hpp"
#include "ofs/optimize.hpp"
#include "ofs/pairwise.hpp"
#include "ofs/parallel.hpp"
#include "ofs/reference_models.hpp"
#include "ofs/rng.hpp"
#include "ofs/samplers.hpp"

namespace ofs {

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::tapered_gp:
      return "tapered_gp";
    case Scenario::tapered_gp_linear_gibbs:
      return "tapered_gp_linear_gibbs";
    case Scenario::pairwise_gaussian:
      return "pairwise_gaussian";
    case Scenario::exact_gaussian_oracle:
      return "exact_gaussian_oracle";
  }
  return "?";
}

std::string to_string(Method m) {
  switch (m) {
    case Method::raw:
      return "raw";
    case Method::ofs:
      return "ofs";
    case Method::curvature:
      return "curvature";
  }
  return "?";
}

Scenario scenario_from_string(const std::string& s) {
  for (Scenario v : {Scenario::tapered_gp, Scenario::tapered_gp_linear_gibbs,
                     Scenario::pairwise_gaussian, Scenario::exact_gaussian_oracle}) {
    if (to_string(v) == s) return v;
  }
  throw ConfigError("unknown scenario '" + s + "'");
}

Method method_from_string(const std::string& s) {
  for (Method v : {Method::raw, Method::ofs, Method::curvature}) {
    if (to_string(v) == s) return v;
  }
  throw ConfigError("unknown method '" + s + "' (expected raw, ofs or curvature)");
}

ExperimentConfig ExperimentConfig::defaults(Scenario s) {
  ExperimentConfig c;
  c.scenario = s;
  c.theta0 = Vector(2);
  switch (s) {
    case Scenario::exact_gaussian_oracle:
      c.theta0 << 0.0, 1.0;
      c.combos = {{PMethod::moment, QMethod::chain_cov}};
      c.methods = {Method::raw, Method::ofs};
      break;
    case Scenario::tapered_gp:
      c.theta0 << 1.0, 0.2;
      c.combos = {{PMethod::plugin, QMethod::plugin}, {PMethod::plugin, QMethod::chain_cov}};
      c.methods = {Method::raw, Method::ofs, Method::curvature};
      break;
    case Scenario::tapered_gp_linear_gibbs:
      c.theta0 << 1.0, 0.2;
      c.beta = Vector(3);
      c.beta << -0.5, 0.0, 0.5;
      c.combos = {{PMethod::plugin, QMethod::plugin}, {PMethod::plugin, QMethod::chain_cov}};
      c.methods = {Method::raw, Method::ofs};
      break;
    case Scenario::pairwise_gaussian:
      c.theta0 << 1.0, 0.2;
      c.combos = {{PMethod::moment, QMethod::chain_cov},
                  {PMethod::bootstrap, QMethod::chain_cov},
                  {PMethod::moment, QMethod::hessian},
                  {PMethod::bootstrap, QMethod::hessian}};
      c.methods = {Method::raw, Method::ofs, Method::curvature};
      break;
  }
  return c;
}

void ExperimentConfig::validate() const {
  if (n_datasets < 1) throw ConfigError("n_datasets must be at least 1");
  for (double a : alpha_grid) {
    if (!(a > 0.0 && a < 1.0)) throw ConfigError("alpha grid values must lie in (0, 1)");
  }
  if (theta0.size() != 2) throw ConfigError("theta0 must have two entries");
  if (chain.iterations < 1 || chain.burn_in < 0 || chain.burn_in >= chain.iterations ||
      chain.thin < 1) {
    throw ConfigError("invalid chain settings");
  }
  if (combos.empty() &&
      std::any_of(methods.begin(), methods.end(), [](Method m) { return m != Method::raw; })) {
    throw ConfigError("adjusted methods need at least one estimator combo");
  }
  if (scenario == Scenario::tapered_gp_linear_gibbs) {
    if (std::find(methods.begin(), methods.end(), Method::curvature) != methods.end()) {
      throw ConfigError("the curvature sampler is not defined for the Gibbs scenario");
    }
    if (beta.size() < 1) throw ConfigError("the Gibbs scenario needs regression coefficients");
  }
  if (grid_size < 2 || pairwise_grid < 2) throw ConfigError("grids need at least 2 x 2 sites");
  if (!(taper_range > 0.0) || !(prior_scale > 0.0)) {
    throw ConfigError("taper range and prior scale must be positive");
  }
  if (replicates < 1 || oracle_n < 2 || bootstrap_k < 3) {
    throw ConfigError("replicates >= 1, oracle_n >= 2 and bootstrap_k >= 3 are required");
  }
}

std::vector<CoverageRow> CoverageTable::select(const std::string& coordinate,
                                               const std::string& method,
                                               const std::string& p_method,
                                               const std::string& q_method) const {
  std::vector<CoverageRow> out;
  for (const CoverageRow& r : rows) {
    if ((coordinate.empty() || r.coordinate == coordinate) &&
        (method.empty() || r.method == method) && (p_method.empty() || r.p_method == p_method) &&
        (q_method.empty() || r.q_method == q_method)) {
      out.push_back(r);
    }
  }
  return out;
}

double mc_stderr(double p_hat, int n) {
  if (n < 1) throw DomainError("Monte Carlo standard error needs n >= 1");
  return std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(n));
}

// Scenario construction ---------------------------------------------------------

namespace {

PriorSpec half_cauchy_prior(Eigen::Index p, double scale) {
  PriorSpec prior;
  prior.coordinates.assign(static_cast<std::size_t>(p), HalfCauchyPrior{scale});
  return prior;
}

}  // namespace

ScenarioModel make_scenario_model(const ExperimentConfig& config) {
  ScenarioModel s;
  s.theta0 = config.theta0;
  switch (config.scenario) {
    case Scenario::exact_gaussian_oracle:
      s.model = std::make_shared<IidNormalModel>(config.oracle_n);
      s.prior.coordinates = {NormalPrior{0.0, 10.0}, HalfCauchyPrior{config.prior_scale}};
      break;
    case Scenario::tapered_gp: {
      TaperedGp gp(CovarianceFamily::exponential(), TaperSpec{config.taper_range, std::nullopt, TaperKernel::wendland},
                   grid_locations(config.grid_size));
      s.model = std::make_shared<GpModel>(std::move(gp), GpModel::Objective::tapered);
      s.prior = half_cauchy_prior(2, config.prior_scale);
      break;
    }
    case Scenario::pairwise_gaussian:
      s.model = std::make_shared<PairwiseModel>(CovarianceFamily::exponential(),
                                                grid_locations(config.pairwise_grid),
                                                config.replicates);
      s.prior = half_cauchy_prior(2, config.prior_scale);
      break;
    case Scenario::tapered_gp_linear_gibbs:
      throw ConfigError("the Gibbs scenario has no single objective model");
  }
  return s;
}

SpatialLinearModel make_spatial_linear_model(const ExperimentConfig& config) {
  const Matrix locs = grid_locations(config.grid_size);
  const Eigen::Index n = locs.rows();
  const Eigen::Index q = config.beta.size();
  // Fixed design: intercept plus standard-normal covariates drawn once.
  Matrix x(n, q);
  x.col(0).setOnes();
  Rng rng(split_seed(config.master_seed, 0x5eedULL));
  for (Eigen::Index k = 1; k < q; ++k) x.col(k) = standard_normal_vector(rng, n);
  TaperedGp gp(CovarianceFamily::exponential(), TaperSpec{config.taper_range, std::nullopt, TaperKernel::wendland}, locs);
  return SpatialLinearModel(std::move(gp), std::move(x), half_cauchy_prior(2, config.prior_scale));
}

ChainConfig prepare_chain(const ObjectiveModel& model, const PriorSpec& prior, const Dataset& data,
                          const Vector& start, const ChainSettings& settings, std::uint64_t seed) {
  const LogDensity logpost = [&](const Vector& t) {
    return log_quasi_posterior(model, prior, t, data);
  };
  const OptimizeResult opt = maximize(logpost, start, model.layout());
  ChainConfig c;
  c.iterations = settings.iterations;
  c.burn_in = settings.burn_in;
  c.thin = settings.thin;
  c.adapt = settings.adapt;
  c.initial = opt.argmax;
  c.proposal_cov = laplace_proposal(logpost, opt.argmax);
  c.seed = seed;
  return c;
}

SandwichEstimate estimate_sandwich(const ObjectiveModel& model, const Dataset& data,
                                   const Chain& raw_chain, const Vector& theta,
                                   const EstimatorCombo& combo, int bootstrap_k,
                                   std::uint64_t seed, unsigned threads) {
  SymMatrix p = SymMatrix::zero(theta.size());
  std::string provenance;
  switch (combo.p) {
    case PMethod::moment:
      p = p_moment(model, data, theta);
      provenance = "P moment over n=" + std::to_string(data.replicate_count()) + " replicates";
      break;
    case PMethod::plugin:
      p = p_plugin(model, theta).sym();
      provenance = "P plug-in";
      break;
    case PMethod::bootstrap:
      p = p_bootstrap(model, theta, bootstrap_k, seed, threads);
      provenance = "P bootstrap K=" + std::to_string(bootstrap_k) + " seed=" + std::to_string(seed);
      break;
  }
  SymMatrix q = SymMatrix::zero(theta.size());
  switch (combo.q) {
    case QMethod::chain_cov:
      q = q_from_chain(raw_chain).sym();
      provenance += "; Q chain covariance over " + std::to_string(raw_chain.size()) + " draws";
      break;
    case QMethod::hessian:
      q = q_from_hessian(model, data, theta).sym();
      provenance += "; Q numerical Hessian";
      break;
    case QMethod::plugin:
      q = q_plugin(model, theta).sym();
      provenance += "; Q plug-in";
      break;
  }
  return SandwichEstimate(p, q, combo.p, combo.q, provenance);
}

LinearGibbsSetup prepare_linear_gibbs(const SpatialLinearModel& lm, const Dataset& data,
                                      TaperedFactorCache& cache, const Vector& theta_start,
                                      const ChainSettings& settings, std::uint64_t seed) {
  const Matrix& x = lm.covariates();
  const Vector beta_ols = (x.transpose() * x).ldlt().solve(x.transpose() * data.replicate(0));
  const LogDensity theta_at_ols = [&](const Vector& t) {
    return lm.theta_log_conditional(t, beta_ols, data, cache);
  };
  const Vector theta0 = maximize(theta_at_ols, theta_start, lm.gp().family().layout()).argmax;
  const Vector beta0 = lm.gls_beta(theta0, data, cache);
  LinearGibbsSetup s;
  s.theta_proposal = laplace_proposal(
      [&](const Vector& t) { return lm.theta_log_conditional(t, beta0, data, cache); }, theta0);
  s.config.iterations = settings.iterations;
  s.config.burn_in = settings.burn_in;
  s.config.thin = settings.thin;
  s.config.adapt = settings.adapt;
  s.config.initial = Vector(lm.layout().size());
  s.config.initial << theta0, beta0;
  s.config.seed = seed;
  return s;
}

ThetaSandwich estimate_theta_sandwich(const SpatialLinearModel& lm, const Dataset& data,
                                      const Chain& raw, const EstimatorCombo& combo,
                                      int bootstrap_k, std::uint64_t seed, unsigned threads) {
  if (raw.layout != lm.layout()) throw DimensionMismatch("chain does not match the model layout");
  const Eigen::Index p = lm.theta_dim();
  std::vector<Eigen::Index> head(static_cast<std::size_t>(p));
  for (Eigen::Index i = 0; i < p; ++i) head[static_cast<std::size_t>(i)] = i;
  Chain theta_chain = raw;
  theta_chain.layout = raw.layout.subset(head);
  theta_chain.draws = raw.draws.leftCols(p);
  const ParamVec center = quasi_bayes_estimate(theta_chain);
  const Vector beta_hat = raw.draws.rightCols(lm.beta_dim()).colwise().mean().transpose();
  const GpModel fixed_mean(lm.gp(), GpModel::Objective::tapered, lm.covariates(), beta_hat);
  return {estimate_sandwich(fixed_mean, data, theta_chain, center.values(), combo, bootstrap_k,
                            seed, threads),
          center};
}

// Experiment driver ---------------------------------------------------------------

namespace {

// covered[coordinate][alpha index]
using Indicators = std::vector<std::vector<char>>;

struct Cell {
  bool ok = false;
  std::string error;
  Indicators covered;
};

struct Outcome {
  // cells[method index * combos + combo index]
  std::vector<Cell> cells;
  std::uint64_t ofs_violations = 0;
  std::uint64_t curvature_violations = 0;
};

Indicators indicators(const Chain& chain, const Vector& truth, const std::vector<double>& alphas) {
  Indicators out(static_cast<std::size_t>(chain.dim()));
  for (Eigen::Index i = 0; i < chain.dim(); ++i) {
    for (double a : alphas) {
      out[static_cast<std::size_t>(i)].push_back(credible_interval(chain, i, a).contains(truth[i]) ? 1 : 0);
    }
  }
  return out;
}

std::size_t combo_count(const ExperimentConfig& c) { return std::max<std::size_t>(1, c.combos.size()); }

Cell& cell(Outcome& o, const ExperimentConfig& c, std::size_t method, std::size_t combo) {
  return o.cells[method * combo_count(c) + combo];
}

void fail_all(Outcome& o, const std::string& why) {
  for (Cell& c : o.cells) {
    if (!c.ok && c.error.empty()) c.error = why;
  }
}

void run_standard(const ExperimentConfig& cfg, const ScenarioModel& sm, std::uint64_t ds,
                  Outcome& out) {
  const ObjectiveModel& model = *sm.model;
  const Dataset data = model.simulate(sm.theta0, split_seed(ds, 0));
  const ChainConfig chain_cfg =
      prepare_chain(model, sm.prior, data, sm.theta0, cfg.chain, split_seed(ds, 1));
  const Chain raw = rw_metropolis(model, sm.prior, data, chain_cfg);
  const ParamVec center = quasi_bayes_estimate(raw);
  const Indicators raw_ind = indicators(raw, sm.theta0, cfg.alpha_grid);

  std::optional<Vector> objective_mode;
  for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
    for (std::size_t c = 0; c < combo_count(cfg); ++c) {
      Cell& slot = cell(out, cfg, m, c);
      try {
        switch (cfg.methods[m]) {
          case Method::raw:
            slot.covered = raw_ind;
            break;
          case Method::ofs: {
            const SandwichEstimate est = estimate_sandwich(
                model, data, raw, center.values(), cfg.combos[c], cfg.bootstrap_k,
                split_seed(ds, 10 + c));
            const Chain adjusted = ofs_adjust(raw, assemble_omega(est, center));
            out.ofs_violations += adjusted.support_violations;
            slot.covered = indicators(adjusted, sm.theta0, cfg.alpha_grid);
            break;
          }
          case Method::curvature: {
            if (!objective_mode) {
              objective_mode =
                  maximize([&](const Vector& t) { return model.log_objective(t, data); },
                           chain_cfg.initial, model.layout())
                      .argmax;
            }
            const ParamVec mode(model.layout(), *objective_mode);
            const SandwichEstimate est =
                estimate_sandwich(model, data, raw, mode.values(), cfg.combos[c],
                                  cfg.bootstrap_k, split_seed(ds, 50 + c));
            const AdjustmentMatrix omega = assemble_omega(est, mode);
            ChainConfig curv_cfg = chain_cfg;
            curv_cfg.initial = mode.values();
            curv_cfg.proposal_cov = omega.omega * chain_cfg.proposal_cov * omega.omega.transpose();
            curv_cfg.seed = split_seed(ds, 100 + c);
            const Chain curv =
                curvature_metropolis(model, sm.prior, data, mode.values(), omega, curv_cfg);
            out.curvature_violations += curv.support_violations;
            slot.covered = indicators(curv, sm.theta0, cfg.alpha_grid);
            break;
          }
        }
        slot.ok = true;
      } catch (const Error& e) {
        slot.error = e.what();
      }
    }
  }
}

void run_linear_gibbs(const ExperimentConfig& cfg, const SpatialLinearModel& lm, std::uint64_t ds,
                      Outcome& out) {
  const Dataset data = lm.simulate(cfg.theta0, cfg.beta, split_seed(ds, 0));
  TaperedFactorCache cache(lm.gp());
  Vector truth(lm.layout().size());
  truth << cfg.theta0, cfg.beta;

  const LinearGibbsSetup setup =
      prepare_linear_gibbs(lm, data, cache, cfg.theta0, cfg.chain, split_seed(ds, 1));
  const auto blocks = lm.blocks(data, cache, setup.theta_proposal);
  const Chain raw = gibbs_run(blocks, lm.layout(), setup.config).chain;
  const Indicators raw_ind = indicators(raw, truth, cfg.alpha_grid);

  for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
    for (std::size_t c = 0; c < combo_count(cfg); ++c) {
      Cell& slot = cell(out, cfg, m, c);
      try {
        if (cfg.methods[m] == Method::raw) {
          slot.covered = raw_ind;
        } else {
          const ThetaSandwich ts = estimate_theta_sandwich(lm, data, raw, cfg.combos[c],
                                                           cfg.bootstrap_k, split_seed(ds, 10 + c));
          std::vector<std::optional<AdjustmentMatrix>> adj(blocks.size());
          adj[0] = assemble_omega(ts.estimate, ts.center);
          GibbsConfig ocfg = setup.config;
          ocfg.seed = split_seed(ds, 200 + c);
          ocfg.initial = raw.draws.bottomRows(1).transpose();
          const GibbsResult res = marginal_ofs_gibbs(blocks, adj, lm.layout(), ocfg);
          out.ofs_violations += res.chain.support_violations;
          slot.covered = indicators(res.chain, truth, cfg.alpha_grid);
        }
        slot.ok = true;
      } catch (const Error& e) {
        slot.error = e.what();
      }
    }
  }
}

}  // namespace

CoverageTable run_coverage_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::size_t n_methods = cfg.methods.size();
  const std::size_t n_combos = combo_count(cfg);
  std::vector<Outcome> outcomes(static_cast<std::size_t>(cfg.n_datasets));

  std::optional<ScenarioModel> sm;
  std::optional<SpatialLinearModel> lm;
  if (cfg.scenario == Scenario::tapered_gp_linear_gibbs) {
    lm.emplace(make_spatial_linear_model(cfg));
  } else {
    sm.emplace(make_scenario_model(cfg));
  }

  parallel_for(outcomes.size(), cfg.threads, [&](std::size_t k) {
    Outcome& o = outcomes[k];
    o.cells.assign(n_methods * n_combos, Cell{});
    const std::uint64_t ds = split_seed(cfg.master_seed, k);
    try {
      if (lm) {
        run_linear_gibbs(cfg, *lm, ds, o);
      } else {
        run_standard(cfg, *sm, ds, o);
      }
    } catch (const Error& e) {
      fail_all(o, e.what());
    }
  });

  CoverageTable table;
  const ParamLayout layout = lm ? lm->layout() : sm->model->layout();
  for (std::size_t c = 0; c < n_combos; ++c) {
    for (std::size_t m = 0; m < n_methods; ++m) {
      for (Eigen::Index i = 0; i < layout.size(); ++i) {
        for (std::size_t a = 0; a < cfg.alpha_grid.size(); ++a) {
          int ok = 0;
          int hits = 0;
          for (Outcome& o : outcomes) {
            const Cell& cl = cell(o, cfg, m, c);
            if (!cl.ok) continue;
            ++ok;
            hits += cl.covered[static_cast<std::size_t>(i)][a];
          }
          CoverageRow row;
          row.scenario = to_string(cfg.scenario);
          row.coordinate = layout.names[static_cast<std::size_t>(i)];
          row.method = to_string(cfg.methods[m]);
          if (!cfg.combos.empty()) {
            row.p_method = to_string(cfg.combos[c].p);
            row.q_method = to_string(cfg.combos[c].q);
          }
          row.nominal = 1.0 - cfg.alpha_grid[a];
          row.empirical = ok > 0 ? static_cast<double>(hits) / ok : std::nan("");
          row.mc_stderr = ok > 0 ? mc_stderr(row.empirical, ok) : std::nan("");
          row.n_effective = ok;
          row.failures = cfg.n_datasets - ok;
          table.rows.push_back(row);
        }
      }
    }
  }
  for (std::size_t k = 0; k < outcomes.size(); ++k) {
    table.ofs_support_violations += outcomes[k].ofs_violations;
    table.curvature_support_violations += outcomes[k].curvature_violations;
    for (std::size_t m = 0; m < n_methods; ++m) {
      for (std::size_t c = 0; c < n_combos; ++c) {
        const Cell& cl = cell(outcomes[k], cfg, m, c);
        if (cl.ok) continue;
        std::string label = to_string(cfg.methods[m]);
        if (!cfg.combos.empty()) {
          label += " " + to_string(cfg.combos[c].p) + "/" + to_string(cfg.combos[c].q);
        }
        table.failure_log.push_back("dataset " + std::to_string(k) + ", " + label + ": " + cl.error);
      }
    }
  }
  return table;
}

// Rendering -------------------------------------------------------------------------

std::string coverage_csv(const CoverageTable& table) {
  std::string out =
      "scenario,coordinate,method,p_method,q_method,nominal,empirical,mc_stderr,n_effective,"
      "failures\n";
  for (const CoverageRow& r : table.rows) {
    out += r.scenario + "," + r.coordinate + "," + r.method + "," + r.p_method + "," + r.q_method +
           "," + format_double(r.nominal) + "," + format_double(r.empirical) + "," +
           format_double(r.mc_stderr) + "," + std::to_string(r.n_effective) + "," +
           std::to_string(r.failures) + "\n";
  }
  return out;
}

CoverageTable coverage_from_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const std::vector<std::string> expected{"scenario", "coordinate", "method",    "p_method",
                                          "q_method", "nominal",    "empirical", "mc_stderr",
                                          "n_effective", "failures"};
  if (t.header != expected) throw Error("'" + path.string() + "' is not a coverage table");
  CoverageTable table;
  for (const auto& row : t.rows) {
    CoverageRow r;
    r.scenario = row[0];
    r.coordinate = row[1];
    r.method = row[2];
    r.p_method = row[3];
    r.q_method = row[4];
    r.nominal = parse_double(row[5]);
    r.empirical = parse_double(row[6]);
    r.mc_stderr = parse_double(row[7]);
    r.n_effective = std::stoi(row[8]);
    r.failures = std::stoi(row[9]);
    table.rows.push_back(r);
  }
  return table;
}

namespace {
std::string series_label(const CoverageRow& r) {
  if (r.method == "raw" || r.p_method.empty()) return r.method;
  return r.method + ":" + r.p_method + "/" + r.q_method;
}
}  // namespace

std::string coverage_curve_csv(const CoverageTable& table) {
  std::string out = "scenario,coordinate,series,nominal,empirical,lower,upper\n";
  std::map<std::string, bool> seen;
  for (const CoverageRow& r : table.rows) {
    const std::string series = series_label(r);
    // Raw rows repeat per combo; emit each curve once.
    const std::string key = r.coordinate + "|" + series + "|" + format_double(r.nominal);
    if (seen[key]) continue;
    seen[key] = true;
    out += r.scenario + "," + r.coordinate + "," + series + "," + format_double(r.nominal) + "," +
           format_double(r.empirical) + "," + format_double(r.empirical - 2.0 * r.mc_stderr) + "," +
           format_double(r.empirical + 2.0 * r.mc_stderr) + "\n";
  }
  return out;
}

std::string coverage_text(const CoverageTable& table) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-24s %-10s %-28s %7s %9s %8s %6s %5s\n", "scenario",
                "coordinate", "series", "nominal", "empirical", "stderr", "n_eff", "fail");
  out << line;
  for (const CoverageRow& r : table.rows) {
    std::snprintf(line, sizeof line, "%-24s %-10s %-28s %7.3f %9.3f %8.4f %6d %5d\n",
                  r.scenario.c_str(), r.coordinate.c_str(), series_label(r).c_str(), r.nominal,
                  r.empirical, r.mc_stderr, r.n_effective, r.failures);
    out << line;
  }
  return out.str();
}

}  // namespace ofs
