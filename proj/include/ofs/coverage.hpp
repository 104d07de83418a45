#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "ofs/chain.hpp"
#include "ofs/model.hpp"
#include "ofs/sandwich.hpp"
#include "ofs/spatial_linear.hpp"

namespace ofs {

enum class Scenario { tapered_gp, tapered_gp_linear_gibbs, pairwise_gaussian, exact_gaussian_oracle };
enum class Method { raw, ofs, curvature };

std::string to_string(Scenario s);
std::string to_string(Method m);
Scenario scenario_from_string(const std::string& s);
Method method_from_string(const std::string& s);

struct EstimatorCombo {
  PMethod p;
  QMethod q;
  bool operator==(const EstimatorCombo&) const = default;
};

struct ChainSettings {
  int iterations = 12000;
  int burn_in = 2000;
  int thin = 1;
  AdaptConfig adapt;
};

struct ExperimentConfig {
  Scenario scenario = Scenario::exact_gaussian_oracle;
  Vector theta0;
  int n_datasets = 200;
  std::vector<double> alpha_grid{0.01, 0.05, 0.10, 0.20, 0.33, 0.50};
  std::vector<Method> methods{Method::raw, Method::ofs};
  std::vector<EstimatorCombo> combos;
  ChainSettings chain;
  std::uint64_t master_seed = 1;
  unsigned threads = 1;

  // Gaussian-process scenarios.
  int grid_size = 15;
  double taper_range = 4.0;
  double prior_scale = 5.0;
  Vector beta;  // linear Gibbs scenario
  // Pairwise scenario.
  int pairwise_grid = 5;
  int replicates = 50;
  // Bootstrap estimator of P.
  int bootstrap_k = 500;
  // Exact Gaussian oracle: sample size.
  int oracle_n = 100;

  /// Scenario defaults: theta0, combos, beta and methods.
  static ExperimentConfig defaults(Scenario s);
  /// Throws ConfigError.
  void validate() const;
};

struct CoverageRow {
  std::string scenario;
  std::string coordinate;
  std::string method;
  std::string p_method;
  std::string q_method;
  double nominal = 0.0;
  double empirical = 0.0;
  double mc_stderr = 0.0;
  int n_effective = 0;
  int failures = 0;
};

struct CoverageTable {
  std::vector<CoverageRow> rows;
  // "dataset k, method/combo: message" for every recorded failure.
  std::vector<std::string> failure_log;
  // Summed support violations of adjusted chains, per method.
  std::uint64_t ofs_support_violations = 0;
  std::uint64_t curvature_support_violations = 0;

  /// Rows matching the given labels (empty label matches anything).
  std::vector<CoverageRow> select(const std::string& coordinate, const std::string& method,
                                  const std::string& p_method = {},
                                  const std::string& q_method = {}) const;
};

double mc_stderr(double p_hat, int n);

/// Simulate, sample, estimate, adjust and tabulate interval coverage for
/// every dataset. Rows are ordered by combo, method, coordinate, nominal.
CoverageTable run_coverage_experiment(const ExperimentConfig& config);

/// CSV with columns scenario,coordinate,method,p_method,q_method,nominal,
/// empirical,mc_stderr,n_effective,failures.
std::string coverage_csv(const CoverageTable& table);
CoverageTable coverage_from_csv(const std::filesystem::path& path);
/// Long-format curve points: scenario,coordinate,series,nominal,empirical,lower,upper
/// where series is method[:p_method/q_method] and lower/upper are 2 stderr bands.
std::string coverage_curve_csv(const CoverageTable& table);
/// Aligned text table for terminals.
std::string coverage_text(const CoverageTable& table);

// Building blocks shared with the command-line tools ---------------------------

/// A model with its prior for the scenarios sampled by plain Metropolis.
struct ScenarioModel {
  std::shared_ptr<const ObjectiveModel> model;
  PriorSpec prior;
  Vector theta0;
};

ScenarioModel make_scenario_model(const ExperimentConfig& config);

/// Spatial linear model of the Gibbs scenario with its fixed design.
SpatialLinearModel make_spatial_linear_model(const ExperimentConfig& config);

/// Chain settings started at the quasi-posterior mode with a Laplace-scaled
/// proposal; the mode is found by Nelder-Mead from `start`.
ChainConfig prepare_chain(const ObjectiveModel& model, const PriorSpec& prior, const Dataset& data,
                          const Vector& start, const ChainSettings& settings, std::uint64_t seed);

/// P-hat and Q-hat for one combo at theta. The chain supplies Q_I.
SandwichEstimate estimate_sandwich(const ObjectiveModel& model, const Dataset& data,
                                   const Chain& raw_chain, const Vector& theta,
                                   const EstimatorCombo& combo, int bootstrap_k,
                                   std::uint64_t seed, unsigned threads = 1);

/// Gibbs start for the spatial linear model: theta maximizes its conditional at
/// the least-squares beta, beta is the matching GLS fit, and the theta proposal
/// is Laplace-scaled there.
struct LinearGibbsSetup {
  GibbsConfig config;
  Matrix theta_proposal;
};
LinearGibbsSetup prepare_linear_gibbs(const SpatialLinearModel& model, const Dataset& data,
                                      TaperedFactorCache& cache, const Vector& theta_start,
                                      const ChainSettings& settings, std::uint64_t seed);

/// Sandwich for the theta block of a raw Gibbs chain, with beta fixed at its
/// chain mean. Q_I comes from the theta columns.
struct ThetaSandwich {
  SandwichEstimate estimate;
  ParamVec center;
};
ThetaSandwich estimate_theta_sandwich(const SpatialLinearModel& model, const Dataset& data,
                                      const Chain& raw, const EstimatorCombo& combo,
                                      int bootstrap_k, std::uint64_t seed, unsigned threads = 1);

}  // namespace ofs
