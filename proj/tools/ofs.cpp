// Command-line front end: run-chain, sandwich, adjust, simulate-coverage,
// demo-poisson, report.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ofs/coverage.hpp"
#include "ofs/errors.hpp"
#include "ofs/io.hpp"
#include "ofs/poisson_demo.hpp"
#include "ofs/rng.hpp"
#include "ofs/run_config.hpp"
#include "ofs/samplers.hpp"

namespace fs = std::filesystem;
using namespace ofs;

namespace {

struct Options {
  std::string config;
  std::string out_dir;
  unsigned threads = 0;
  std::optional<std::uint64_t> seed;
  std::string chain;
  std::string omega;
  std::string table;
};

RunConfig load(const Options& o) {
  if (o.config.empty()) throw ConfigError("--config is required");
  RunConfig c = load_run_config(o.config);
  if (o.seed) override_seed(c, *o.seed);
  if (o.threads > 0) c.threads = c.experiment.threads = o.threads;
  if (!o.out_dir.empty()) c.out_dir = o.out_dir;
  return c;
}

fs::path out_dir(const Options& o, const fs::path& fallback) {
  return o.out_dir.empty() ? fallback : fs::path(o.out_dir);
}

// The data set of dataset index 0 of the coverage experiment with the same seed.
std::uint64_t dataset_seed(const RunConfig& c) { return split_seed(c.seed, 0); }

void write_dataset(const ExperimentConfig& e, const Dataset& d, const fs::path& path) {
  switch (e.scenario) {
    case Scenario::exact_gaussian_oracle: {
      std::string s = "replicate,value\n";
      for (Eigen::Index r = 0; r < d.replicate_count(); ++r) {
        s += std::to_string(r) + "," + format_double(d.observations(r, 0)) + "\n";
      }
      write_text(path, s);
      break;
    }
    case Scenario::pairwise_gaussian:
      write_replicated_dataset(d, path);
      break;
    default:
      write_gp_dataset(d, path);
      break;
  }
}

int cmd_run_chain(const Options& o) {
  const RunConfig c = load(o);
  const ExperimentConfig& e = c.require_scenario();
  const std::uint64_t ds = dataset_seed(c);
  Chain chain;
  if (e.scenario == Scenario::tapered_gp_linear_gibbs) {
    const SpatialLinearModel lm = make_spatial_linear_model(e);
    const Dataset data = lm.simulate(e.theta0, e.beta, split_seed(ds, 0));
    TaperedFactorCache cache(lm.gp());
    const LinearGibbsSetup setup =
        prepare_linear_gibbs(lm, data, cache, e.theta0, e.chain, split_seed(ds, 1));
    const GibbsResult res = gibbs_run(lm.blocks(data, cache, setup.theta_proposal), lm.layout(), setup.config);
    chain = res.chain;
    write_dataset(e, data, c.out_dir / "data.csv");
    for (const BlockStats& b : res.blocks) {
      if (b.proposed > 0) {
        std::printf("block %s acceptance %.3f\n", b.id.c_str(),
                    static_cast<double>(b.accepted) / static_cast<double>(b.proposed));
      }
    }
  } else {
    const ScenarioModel sm = make_scenario_model(e);
    const Dataset data = sm.model->simulate(sm.theta0, split_seed(ds, 0));
    const ChainConfig cc = prepare_chain(*sm.model, sm.prior, data, sm.theta0, e.chain, split_seed(ds, 1));
    chain = rw_metropolis(*sm.model, sm.prior, data, cc);
    write_dataset(e, data, c.out_dir / "data.csv");
  }
  const fs::path path = c.out_dir / "chain.csv";
  write_chain(chain, path);
  std::printf("wrote %s (%lld draws), acceptance rate %.3f\n", path.string().c_str(),
              static_cast<long long>(chain.size()), chain.acceptance_rate);
  return 0;
}

int cmd_sandwich(const Options& o) {
  const RunConfig c = load(o);
  const ExperimentConfig& e = c.require_scenario();
  const Chain chain = read_chain(o.chain);
  if (chain.adjusted != Adjustment::raw) {
    throw Error("'" + o.chain + "' is already adjusted (" + to_string(chain.adjusted) +
                "); sandwich estimates need the raw chain");
  }
  if (e.combos.empty()) throw ConfigError(c.source + ": /sandwich/combos: no estimator combos");
  const std::uint64_t ds = dataset_seed(c);
  Json all = Json::array();
  const fs::path dir = c.out_dir;
  for (std::size_t k = 0; k < e.combos.size(); ++k) {
    const EstimatorCombo& combo = e.combos[k];
    const std::uint64_t boot_seed = split_seed(ds, 10 + k);
    std::optional<SandwichEstimate> est;
    std::optional<ParamVec> center;
    try {
      if (e.scenario == Scenario::tapered_gp_linear_gibbs) {
        const SpatialLinearModel lm = make_spatial_linear_model(e);
        const Dataset data = lm.simulate(e.theta0, e.beta, split_seed(ds, 0));
        const ThetaSandwich ts = estimate_theta_sandwich(lm, data, chain, combo, e.bootstrap_k, boot_seed, c.threads);
        est.emplace(ts.estimate);
        center.emplace(ts.center);
      } else {
        const ScenarioModel sm = make_scenario_model(e);
        if (chain.layout != sm.model->layout()) {
          throw DimensionMismatch("chain columns do not match the " + sm.model->name() + " parameters");
        }
        const Dataset data = sm.model->simulate(sm.theta0, split_seed(ds, 0));
        center.emplace(quasi_bayes_estimate(chain));
        est.emplace(estimate_sandwich(*sm.model, data, chain, center->values(), combo, e.bootstrap_k,
                                      boot_seed, c.threads));
      }
    } catch (const UnsupportedCapability& err) {
      throw UnsupportedCapability("estimator " + to_string(combo.p) + "/" + to_string(combo.q) +
                                  ": " + err.what());
    }
    const AdjustmentMatrix omega = assemble_omega(*est, *center);
    const std::string tag = to_string(combo.p) + "_" + to_string(combo.q);
    write_text(dir / ("omega_" + tag + ".json"), adjustment_to_json(omega).dump(2) + "\n");
    all.push_back(sandwich_to_json(*est));
    std::printf("%s/%s: omega written to %s\n", to_string(combo.p).c_str(),
                to_string(combo.q).c_str(), (dir / ("omega_" + tag + ".json")).string().c_str());
  }
  write_text(dir / "sandwich.json", all.dump(2) + "\n");
  return 0;
}

int cmd_adjust(const Options& o) {
  const Chain chain = read_chain(o.chain);
  const AdjustmentMatrix omega = adjustment_from_json(Json::parse(read_text(o.omega)));
  if (omega.dim() != chain.dim() || omega.center.layout() != chain.layout) {
    throw DimensionMismatch("adjustment for " + std::to_string(omega.dim()) +
                            " coordinates does not match the chain's " + std::to_string(chain.dim()));
  }
  const Chain adjusted = ofs_adjust(chain, omega);
  const fs::path src(o.chain);
  const fs::path path = out_dir(o, src.parent_path()) / (src.stem().string() + "_ofs.csv");
  write_chain(adjusted, path);
  std::printf("wrote %s, support violations: %llu\n", path.string().c_str(),
              static_cast<unsigned long long>(adjusted.support_violations));
  return 0;
}

int cmd_simulate_coverage(const Options& o) {
  const RunConfig c = load(o);
  const ExperimentConfig& e = c.require_scenario();
  const CoverageTable t = run_coverage_experiment(e);
  write_text(c.out_dir / "coverage.csv", coverage_csv(t));
  write_text(c.out_dir / "coverage_curve.csv", coverage_curve_csv(t));
  std::string failures;
  for (const std::string& f : t.failure_log) failures += f + "\n";
  write_text(c.out_dir / "failures.txt", failures);
  std::cout << coverage_text(t);
  std::printf("support violations: ofs %llu, curvature %llu; failures logged: %zu\n",
              static_cast<unsigned long long>(t.ofs_support_violations),
              static_cast<unsigned long long>(t.curvature_support_violations), t.failure_log.size());
  return 0;
}

int cmd_demo_poisson(const Options& o) {
  const RunConfig c = load(o);
  const PoissonDemoResult r = run_poisson_demo(c.poisson);
  write_chain(r.raw, c.out_dir / "poisson_raw.csv");
  write_chain(r.adjusted, c.out_dir / "poisson_ofs.csv");
  write_text(c.out_dir / "summary.json", r.summary.dump(2) + "\n");
  for (const auto& row : r.summary["theta_intervals_90"]) {
    std::printf("%-8s 90%% width ratio (adjusted/raw) %.3f\n",
                row["coordinate"].get<std::string>().c_str(), row["width_ratio"].get<double>());
  }
  std::printf("wrote %s\n", (c.out_dir / "summary.json").string().c_str());
  return 0;
}

int cmd_report(const Options& o) {
  const CoverageTable t = coverage_from_csv(o.table);
  std::cout << coverage_text(t);
  const fs::path dir = out_dir(o, fs::path(o.table).parent_path());
  write_text(dir / "coverage_curve.csv", coverage_curve_csv(t));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open-faced sandwich adjustment for quasi-posterior samples"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", o.config, "JSON run configuration");
    if (config_required) opt->required();
    sub->add_option("--out-dir", o.out_dir, "output directory (overrides output.dir)");
    sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed-override", o.seed, "master seed replacing the configured one");
  };
  CLI::App* run = app.add_subcommand("run-chain", "simulate a data set and run the raw sampler");
  common(run, true);
  CLI::App* sand = app.add_subcommand("sandwich", "estimate P, Q and Omega from a raw chain");
  common(sand, true);
  sand->add_option("chain", o.chain, "raw chain CSV")->required()->check(CLI::ExistingFile);
  CLI::App* adj = app.add_subcommand("adjust", "apply an Omega file to a raw chain");
  adj->add_option("chain", o.chain, "raw chain CSV")->required()->check(CLI::ExistingFile);
  adj->add_option("omega", o.omega, "Omega JSON")->required()->check(CLI::ExistingFile);
  adj->add_option("--out-dir", o.out_dir, "output directory (default: next to the chain)");
  CLI::App* cov = app.add_subcommand("simulate-coverage", "run a coverage experiment");
  common(cov, true);
  CLI::App* demo = app.add_subcommand("demo-poisson", "synthetic spatio-temporal Poisson demo");
  common(demo, true);
  CLI::App* rep = app.add_subcommand("report", "print a coverage table and write its curves");
  rep->add_option("table", o.table, "coverage.csv")->required()->check(CLI::ExistingFile);
  rep->add_option("--out-dir", o.out_dir, "output directory (default: next to the table)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) return cmd_run_chain(o);
    if (sand->parsed()) return cmd_sandwich(o);
    if (adj->parsed()) return cmd_adjust(o);
    if (cov->parsed()) return cmd_simulate_coverage(o);
    if (demo->parsed()) return cmd_demo_poisson(o);
    if (rep->parsed()) return cmd_report(o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
