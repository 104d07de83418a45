// Acceptance suite. Prints one PASS/FAIL line per criterion (details indented
// above it) and exits 1 when any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "dense_reference.hpp"
#include "ofs/coverage.hpp"
#include "ofs/errors.hpp"
#include "ofs/gp_taper.hpp"
#include "ofs/io.hpp"
#include "ofs/optimize.hpp"
#include "ofs/pairwise.hpp"
#include "ofs/poisson_demo.hpp"
#include "ofs/rng.hpp"
#include "ofs/samplers.hpp"
#include "ofs/sandwich.hpp"
#include "ofs/spatial_linear.hpp"

using namespace ofs;
namespace fs = std::filesystem;

namespace {

struct Context {
  fs::path out_dir;
  unsigned threads = 1;
  // Reduced dataset counts for a fast look; never the acceptance verdict.
  bool quick = false;
  std::uint64_t seed = 20240601;
};

class Verdict {
 public:
  void check(bool ok, const std::string& what) {
    pass_ = pass_ && ok;
    std::printf("    %s %s\n", ok ? "ok  " : "FAIL", what.c_str());
    std::fflush(stdout);
  }
  void note(const std::string& what) {
    std::printf("    %s\n", what.c_str());
    std::fflush(stdout);
  }
  bool pass() const { return pass_; }

 private:
  bool pass_ = true;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

Matrix random_spd(Rng& rng, Eigen::Index p) {
  Matrix b(p, p);
  for (Eigen::Index j = 0; j < p; ++j) b.col(j) = standard_normal_vector(rng, p);
  return b * b.transpose() + 0.5 * Matrix::Identity(p, p);
}

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

double rel_frobenius(const Matrix& a, const Matrix& ref) { return (a - ref).norm() / ref.norm(); }

// Coverage at one nominal level for a method/combo/coordinate.
const CoverageRow& row_at(const CoverageTable& t, const std::string& coord, const std::string& method,
                          const std::string& p, const std::string& q, double nominal) {
  for (const CoverageRow& r : t.rows) {
    if (r.coordinate == coord && r.method == method && (p.empty() || r.p_method == p) &&
        (q.empty() || r.q_method == q) && std::abs(r.nominal - nominal) < 1e-12) {
      return r;
    }
  }
  throw Error("no coverage row for " + coord + " " + method + " " + p + "/" + q);
}

std::string cell(const CoverageRow& r) {
  return fmt("%.3f (se %.3f", r.empirical, r.mc_stderr) + ", n " + std::to_string(r.n_effective) +
         (r.failures ? ", failures " + std::to_string(r.failures) : std::string()) + ")";
}

void save(const Context& ctx, const std::string& name, const CoverageTable& t) {
  write_text(ctx.out_dir / (name + ".csv"), coverage_csv(t));
  write_text(ctx.out_dir / (name + "_curve.csv"), coverage_curve_csv(t));
  std::string log;
  for (const std::string& f : t.failure_log) log += f + "\n";
  write_text(ctx.out_dir / (name + "_failures.txt"), log);
}

int datasets(const Context& ctx) { return ctx.quick ? 20 : 200; }

// Two-sample Kolmogorov-Smirnov ------------------------------------------------------

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

// Asymptotic Kolmogorov tail with the usual small-sample correction.
double ks_p_value(double d, double na, double nb) {
  const double ne = na * nb / (na + nb);
  const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

// Integrated autocorrelation time, summing lags until the correlation drops
// below 0.05.
double autocorr_time(const Vector& x) {
  const Eigen::Index n = x.size();
  const Vector c = x.array() - x.mean();
  const double var = c.squaredNorm() / static_cast<double>(n);
  if (var == 0.0) return 1.0;
  double tau = 1.0;
  for (Eigen::Index lag = 1; lag < n / 2; ++lag) {
    const double rho = c.head(n - lag).dot(c.tail(n - lag)) / static_cast<double>(n) / var;
    if (rho < 0.05) break;
    tau += 2.0 * rho;
  }
  return tau;
}

std::vector<double> thinned(const Vector& x, Eigen::Index step) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < x.size(); i += step) out.push_back(x[i]);
  return out;
}

// Criteria -------------------------------------------------------------------------------

bool omega_algebra(const Context&) {
  Verdict v;
  const Stopwatch clock;
  Rng rng(101);
  double sqrt_err = 0.0;
  double ident_err = 0.0;
  double scale_err = 0.0;
  for (Eigen::Index p = 1; p <= 6; ++p) {
    for (int rep = 0; rep < 20; ++rep) {
      const Matrix a = random_spd(rng, p);
      const Matrix r = spd_sqrt(SpdMatrix(a)).matrix();
      sqrt_err = std::max(sqrt_err, max_abs(r * r - a) / max_abs(a));

      const ParamVec center(ParamLayout(std::vector<std::string>(static_cast<std::size_t>(p), "x"),
                                        std::vector<Support>(static_cast<std::size_t>(p), Support::real)),
                            Vector::Zero(p));
      const SymMatrix sa(a);
      const SandwichEstimate same(sa, sa, PMethod::plugin, QMethod::plugin);
      ident_err = std::max(ident_err, max_abs(assemble_omega(same, center).omega - Matrix::Identity(p, p)));

      const Matrix b = random_spd(rng, p);
      const Matrix base = assemble_omega(SandwichEstimate(SymMatrix(a), SymMatrix(b), PMethod::plugin, QMethod::plugin),
                                         center)
                              .omega;
      for (double c : {1e-3, 7.0, 1e4}) {
        const Matrix scaled =
            assemble_omega(SandwichEstimate(SymMatrix(Matrix(c * a)), SymMatrix(Matrix(c * b)), PMethod::plugin,
                                            QMethod::plugin),
                           center)
                .omega;
        scale_err = std::max(scale_err, max_abs(scaled - base));
      }
    }
  }
  v.check(sqrt_err < 1e-10, fmt("spd_sqrt multiply-back, max relative error %.2e", sqrt_err));
  v.check(ident_err < 1e-10, fmt("Omega(P, P) = I, max error %.2e", ident_err));
  v.check(scale_err < 1e-10, fmt("Omega(cP, cQ) = Omega(P, Q), max error %.2e", scale_err));

  // Push-forward: Z ~ N(0, Q^-1) mapped by Omega has covariance J^-1 = Q^-1 P Q^-1.
  double worst = 0.0;
  for (Eigen::Index p : {2, 3}) {
    const Matrix pm = random_spd(rng, p);
    const Matrix qm = random_spd(rng, p);
    const ParamVec center(ParamLayout(std::vector<std::string>(static_cast<std::size_t>(p), "x"),
                                      std::vector<Support>(static_cast<std::size_t>(p), Support::real)),
                          Vector::Zero(p));
    const Matrix om =
        assemble_omega(SandwichEstimate(SymMatrix(pm), SymMatrix(qm), PMethod::plugin, QMethod::plugin), center).omega;
    const Matrix qi = qm.inverse();
    const Matrix l = Eigen::LLT<Matrix>(qi).matrixL();
    const int draws = 100000;
    Matrix y(draws, p);
    for (int k = 0; k < draws; ++k) y.row(k) = (om * l * standard_normal_vector(rng, p)).transpose();
    const Matrix cov = sample_covariance(y).matrix();
    worst = std::max(worst, rel_frobenius(cov, qi * pm * qi));
  }
  v.check(worst < 0.05, fmt("cov(Omega Z) vs J^-1 at 1e5 draws, relative error %.4f", worst));
  const double secs = clock.seconds();
  v.check(secs < 60.0, fmt("runtime %.1f s (limit 60 s)", secs));
  return v.pass();
}

bool oracle_calibration(const Context& ctx) {
  Verdict v;
  const Stopwatch clock;
  ExperimentConfig c = ExperimentConfig::defaults(Scenario::exact_gaussian_oracle);
  c.methods = {Method::raw};
  c.combos.clear();
  c.n_datasets = datasets(ctx);
  c.master_seed = split_seed(ctx.seed, 2);
  c.threads = ctx.threads;
  const CoverageTable t = run_coverage_experiment(c);
  save(ctx, "oracle", t);
  for (const CoverageRow& r : t.rows) {
    const double band = 3.0 * mc_stderr(r.nominal, c.n_datasets);
    v.check(r.failures == 0 && std::abs(r.empirical - r.nominal) <= band,
            r.coordinate + fmt(" nominal %.2f: empirical %.3f, allowed [%.3f, ", r.nominal, r.empirical,
                               r.nominal - band) +
                fmt("%.3f]", r.nominal + band) + (r.failures ? " failures " + std::to_string(r.failures) : ""));
  }
  const double secs = clock.seconds();
  v.check(secs < 600.0, fmt("runtime %.1f s (limit 600 s)", secs));
  return v.pass();
}

struct ScenarioRun {
  CoverageTable table;
  double seconds = 0.0;
};

ScenarioRun run_scenario(const Context& ctx, Scenario s, const std::string& name, std::uint64_t salt) {
  ExperimentConfig c = ExperimentConfig::defaults(s);
  c.n_datasets = datasets(ctx);
  c.master_seed = split_seed(ctx.seed, salt);
  c.threads = ctx.threads;
  std::printf("  running %s: %d datasets, %zu combos, %u thread(s)\n", name.c_str(), c.n_datasets,
              c.combos.size(), c.threads);
  std::fflush(stdout);
  const Stopwatch clock;
  ScenarioRun r{run_coverage_experiment(c), 0.0};
  r.seconds = clock.seconds();
  save(ctx, name, r.table);
  std::printf("  %s finished in %.0f s; support violations ofs %llu, curvature %llu\n", name.c_str(), r.seconds,
              static_cast<unsigned long long>(r.table.ofs_support_violations),
              static_cast<unsigned long long>(r.table.curvature_support_violations));
  return r;
}

bool tapered_coverage(const Context& ctx, const ScenarioRun& run) {
  Verdict v;
  const CoverageTable& t = run.table;
  for (const char* q : {"plugin", "chain_cov"}) {
    for (const char* coord : {"sigma2", "c"}) {
      const CoverageRow& r = row_at(t, coord, "ofs", "plugin", q, 0.9);
      v.check(r.n_effective > 0 && r.empirical >= 0.84 && r.empirical <= 0.96,
              std::string("ofs plugin/") + q + " " + coord + " 90%: " + cell(r) + ", need [0.84, 0.96]");
    }
  }
  const CoverageRow& s2 = row_at(t, "sigma2", "raw", "", "", 0.9);
  const CoverageRow& cc = row_at(t, "c", "raw", "", "", 0.9);
  v.check(s2.empirical < 0.80, "raw sigma2 90%: " + cell(s2) + ", need < 0.80");
  v.check(cc.empirical > 0.96, "raw c 90%: " + cell(cc) + ", need > 0.96");
  // One core here; the limit is stated for eight workers, so the measured
  // time is scaled by threads / 8 assuming ideal scaling across datasets.
  const double projected = run.seconds * static_cast<double>(ctx.threads) / 8.0;
  v.check(projected < 3600.0, fmt("runtime %.0f s on %.0f thread(s), projected %.0f s on 8 workers (limit 3600 s)",
                                  run.seconds, static_cast<double>(ctx.threads), projected));
  return v.pass();
}

bool pairwise_coverage(const Context&, const ScenarioRun& run) {
  Verdict v;
  const CoverageTable& t = run.table;
  const std::vector<std::pair<std::string, std::string>> combos{
      {"moment", "chain_cov"}, {"bootstrap", "chain_cov"}, {"moment", "hessian"}, {"bootstrap", "hessian"}};
  for (const char* coord : {"sigma2", "c"}) {
    double lo = 1.0;
    double hi = 0.0;
    for (const auto& [p, q] : combos) {
      const CoverageRow& r = row_at(t, coord, "ofs", p, q, 0.9);
      v.check(r.n_effective > 0 && r.empirical >= 0.84 && r.empirical <= 0.96,
              "ofs " + p + "/" + q + " " + coord + " 90%: " + cell(r) + ", need [0.84, 0.96]");
      lo = std::min(lo, r.empirical);
      hi = std::max(hi, r.empirical);
    }
    v.check(hi - lo <= 0.04 + 1e-12, std::string(coord) + fmt(" spread across the four combos %.3f (limit 0.04)", hi - lo));
    const CoverageRow& raw = row_at(t, coord, "raw", "", "", 0.9);
    v.check(raw.empirical < 0.82, std::string("raw ") + coord + " 90%: " + cell(raw) + ", need < 0.82");
  }
  v.check(run.seconds < 1800.0, fmt("runtime %.0f s (limit 1800 s)", run.seconds));
  return v.pass();
}

bool curvature_parity(const ScenarioRun& tapered, const ScenarioRun& pairwise) {
  Verdict v;
  for (const auto* run : {&tapered, &pairwise}) {
    for (const CoverageRow& r : run->table.rows) {
      if (r.method != "curvature" || std::abs(r.nominal - 0.9) > 1e-12) continue;
      const CoverageRow& o = row_at(run->table, r.coordinate, "ofs", r.p_method, r.q_method, 0.9);
      const double gap = std::abs(r.empirical - o.empirical);
      v.check(r.n_effective > 0 && o.n_effective > 0 && gap <= 0.05 + 1e-12,
              r.scenario + " " + r.p_method + "/" + r.q_method + " " + r.coordinate +
                  fmt(": curvature %.3f vs ofs %.3f, gap %.3f (limit 0.05)", r.empirical, o.empirical, gap));
    }
  }
  return v.pass();
}

struct GibbsRuns {
  Chain raw;
  Chain ofs;
};

bool gibbs_propagation(const Context& ctx) {
  Verdict v;
  const Stopwatch clock;
  ExperimentConfig c = ExperimentConfig::defaults(Scenario::tapered_gp_linear_gibbs);
  c.master_seed = split_seed(ctx.seed, 6);
  const EstimatorCombo combo{PMethod::plugin, QMethod::plugin};

  // Desk grid: beta marginals unchanged, theta widths altered.
  {
    const SpatialLinearModel lm = make_spatial_linear_model(c);
    const std::uint64_t ds = split_seed(c.master_seed, 0);
    const Dataset data = lm.simulate(c.theta0, c.beta, split_seed(ds, 0));
    TaperedFactorCache cache(lm.gp());
    const LinearGibbsSetup setup = prepare_linear_gibbs(lm, data, cache, c.theta0, c.chain, split_seed(ds, 1));
    const auto blocks = lm.blocks(data, cache, setup.theta_proposal);
    const Chain raw = gibbs_run(blocks, lm.layout(), setup.config).chain;
    const ThetaSandwich ts = estimate_theta_sandwich(lm, data, raw, combo, c.bootstrap_k, split_seed(ds, 10));
    std::vector<std::optional<AdjustmentMatrix>> adj(blocks.size());
    adj[0] = assemble_omega(ts.estimate, ts.center);
    GibbsConfig ocfg = setup.config;
    ocfg.seed = split_seed(ds, 200);
    ocfg.initial = raw.draws.bottomRows(1).transpose();
    const Chain ofs = marginal_ofs_gibbs(blocks, adj, lm.layout(), ocfg).chain;
    write_chain(raw, ctx.out_dir / "gibbs_raw.csv");
    write_chain(ofs, ctx.out_dir / "gibbs_ofs.csv");

    const Eigen::Index p = lm.theta_dim();
    double tau = 1.0;
    for (Eigen::Index j = p; j < raw.dim(); ++j) {
      tau = std::max({tau, autocorr_time(raw.draws.col(j)), autocorr_time(ofs.draws.col(j))});
    }
    const Eigen::Index step = static_cast<Eigen::Index>(std::ceil(2.0 * tau));
    v.note(fmt("%.0f x %.0f grid; beta draws thinned every %.0f iterations for the KS test",
               static_cast<double>(c.grid_size), static_cast<double>(c.grid_size), static_cast<double>(step)));
    for (Eigen::Index j = p; j < raw.dim(); ++j) {
      const auto a = thinned(raw.draws.col(j), step);
      const auto b = thinned(ofs.draws.col(j), step);
      const double d = ks_statistic(a, b);
      const double pv = ks_p_value(d, static_cast<double>(a.size()), static_cast<double>(b.size()));
      v.check(pv > 0.01, raw.layout.names[static_cast<std::size_t>(j)] +
                             fmt(": KS D %.4f on %.0f thinned draws, p = %.3f (need > 0.01)", d,
                                 static_cast<double>(a.size()), pv));
    }
    bool altered = false;
    std::string ratios;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double r = credible_interval(ofs, j, 0.1).width() / credible_interval(raw, j, 0.1).width();
      altered = altered || r < 0.9 || r > 1.1;
      ratios += " " + raw.layout.names[static_cast<std::size_t>(j)] + fmt(" %.3f", r);
    }
    v.check(altered, "theta 90% width ratio (ofs / raw):" + ratios + "; need one outside [0.9, 1.1]");
  }

  // Tiny grid: conditional OFS against marginal OFS.
  {
    ExperimentConfig t = c;
    t.grid_size = 7;
    t.master_seed = split_seed(ctx.seed, 66);
    const SpatialLinearModel lm = make_spatial_linear_model(t);
    const std::uint64_t ds = split_seed(t.master_seed, 0);
    const Dataset data = lm.simulate(t.theta0, t.beta, split_seed(ds, 0));
    TaperedFactorCache cache(lm.gp());
    const LinearGibbsSetup setup = prepare_linear_gibbs(lm, data, cache, t.theta0, t.chain, split_seed(ds, 1));
    const auto blocks = lm.blocks(data, cache, setup.theta_proposal);
    const Chain raw = gibbs_run(blocks, lm.layout(), setup.config).chain;
    const ThetaSandwich ts = estimate_theta_sandwich(lm, data, raw, combo, t.bootstrap_k, split_seed(ds, 10));
    std::vector<std::optional<AdjustmentMatrix>> adj(blocks.size());
    adj[0] = assemble_omega(ts.estimate, ts.center);
    GibbsConfig ocfg = setup.config;
    ocfg.seed = split_seed(ds, 200);
    ocfg.initial = raw.draws.bottomRows(1).transpose();
    const Chain marginal = marginal_ofs_gibbs(blocks, adj, lm.layout(), ocfg).chain;

    // Omega is re-estimated at the maximizer of the tapered likelihood given
    // the current beta; the adjustment stays centered at the quasi-Bayes estimate.
    const ParamLayout theta_layout = lm.gp().family().layout();
    Vector warm = ts.center.values();
    const OmegaEstimator estimator = [&](std::size_t, const Vector& state, int) {
      const GpModel fixed(lm.gp(), GpModel::Objective::tapered, lm.covariates(), lm.beta_part(state));
      warm = maximize([&](const Vector& th) { return fixed.log_objective(th, data); }, warm, theta_layout).argmax;
      const SandwichEstimate est(p_plugin(fixed, warm).sym(), q_plugin(fixed, warm).sym(), PMethod::plugin,
                                 QMethod::plugin);
      return assemble_omega(est, ts.center);
    };
    GibbsConfig ccfg = ocfg;
    ccfg.seed = split_seed(ds, 300);
    const Chain conditional =
        conditional_ofs_gibbs(blocks, lm.layout(), ccfg, estimator, ConditionalOfsOptions{true}).chain;
    write_chain(marginal, ctx.out_dir / "gibbs7_marginal_ofs.csv");
    write_chain(conditional, ctx.out_dir / "gibbs7_conditional_ofs.csv");

    for (Eigen::Index j = 0; j < lm.theta_dim(); ++j) {
      const Vector a = marginal.draws.col(j);
      const Vector b = conditional.draws.col(j);
      const double sd = std::sqrt((a.array() - a.mean()).square().sum() / static_cast<double>(a.size() - 1));
      double worst = 0.0;
      for (int k = 1; k <= 19; ++k) {
        const double q = 0.05 * k;
        worst = std::max(worst, std::abs(empirical_quantile(std::span<const double>(a.data(), a.size()), q) -
                                         empirical_quantile(std::span<const double>(b.data(), b.size()), q)));
      }
      v.check(worst <= 0.3 * sd, theta_layout.names[static_cast<std::size_t>(j)] +
                                     fmt(" (7 x 7): max quantile gap %.4f over q = 0.05..0.95, limit 0.3 sd = %.4f",
                                         worst, 0.3 * sd));
    }
  }
  v.note(fmt("runtime %.0f s", clock.seconds()));
  return v.pass();
}

bool differential_oracles(const Context&) {
  Verdict v;
  const CovarianceFamily fam = CovarianceFamily::exponential();
  const Vector truth = Eigen::Vector2d(1.0, 0.2);

  {
    const Matrix locs = grid_locations(20);
    const TaperSpec taper{4.0, std::nullopt, TaperKernel::wendland};
    const Dataset data = simulate_gp(fam, truth, locs, 7001);
    const Matrix tap = dense_ref::taper(4.0, locs);
    double worst = 0.0;
    for (const Vector& th : {truth, Vector(Eigen::Vector2d(0.5, 0.6)), Vector(Eigen::Vector2d(2.0, 0.1))}) {
      const double ref = dense_ref::tapered(dense_ref::sigma(th[0], th[1], locs), tap, data.replicate(0));
      worst = std::max(worst, std::abs(tapered_loglik(fam, taper, th, data) - ref));
    }
    v.check(worst < 1e-8, fmt("sparse vs dense tapered log-likelihood, n = 400: max |diff| %.2e (limit 1e-8)", worst));
  }
  {
    const PairwiseModel model(fam, grid_locations(5), 50);
    const Dataset data = model.simulate(truth, 7002);
    double worst = 0.0;
    for (const Vector& th : {truth, Vector(Eigen::Vector2d(0.5, 0.6)), Vector(Eigen::Vector2d(2.0, 0.1))}) {
      const double ref = dense_ref::pairwise(th, model.locations(), data.observations);
      worst = std::max(worst, std::abs(model.log_objective(th, data) - ref) / std::abs(ref));
    }
    v.check(worst < 1e-10, fmt("pairwise sufficient-statistic path vs brute force: max relative diff %.2e (limit 1e-10)",
                               worst));
  }
  {
    double worst = 0.0;
    const Vector th = Eigen::Vector2d(1.1, 0.25);
    const GpModel gp(TaperedGp(fam, TaperSpec{3.0, std::nullopt, TaperKernel::wendland}, grid_locations(8)),
                     GpModel::Objective::tapered);
    const Dataset gd = gp.simulate(truth, 7003);
    const Vector s = gp.score(th, gd, 0);
    const Vector fd = numerical_gradient([&](const Vector& t) { return gp.log_objective(t, gd); }, th);
    worst = std::max(worst, (s - fd).norm() / s.norm());

    const PairwiseModel pw(fam, grid_locations(4), 5);
    const Dataset pd = pw.simulate(truth, 7004);
    const Vector ps = pw.gradient(th, pd);
    const Vector pfd = numerical_gradient([&](const Vector& t) { return pw.log_objective(t, pd); }, th);
    worst = std::max(worst, (ps - pfd).norm() / ps.norm());

    const CovarianceFamily g = CovarianceFamily::gneiting();
    Rng rng(7005);
    const Eigen::Index n = 40;
    Matrix sites(n, 2);
    Vector times(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      sites.row(i) = Eigen::RowVector2d(6.0 * uniform01(rng), 6.0 * uniform01(rng));
      times[i] = 30.0 * uniform01(rng);
    }
    Vector tg(5);
    tg << 1.0, 0.01, 0.5, 0.4, 0.2;
    const TaperSpec st{4.0, 25.0, TaperKernel::wendland};
    const Dataset sd = simulate_gp(g, tg, sites, 7006, times);
    const Vector gs = tapered_score(g, st, tg, sd);
    const Vector gfd = numerical_gradient([&](const Vector& t) { return tapered_loglik(g, st, t, sd); }, tg);
    worst = std::max(worst, (gs - gfd).norm() / gs.norm());
    v.check(worst < 1e-5, fmt("analytic scores vs finite differences (tapered, pairwise, space-time): max relative "
                              "error %.2e (limit 1e-5)",
                              worst));
  }
  {
    const GpModel model(TaperedGp(fam, TaperSpec{4.0, std::nullopt, TaperKernel::wendland}, grid_locations(10)),
                        GpModel::Objective::tapered);
    const Matrix p = model.analytic_p(truth).matrix();
    const Matrix q = model.analytic_q(truth).matrix();
    const Matrix boot = p_bootstrap(model, truth, 10000, 7007).matrix();
    const double pe = rel_frobenius(p, boot);
    v.check(pe < 0.15, fmt("plug-in P vs parametric bootstrap (K = 10000): relative error %.4f (limit 0.15)", pe));
    Matrix info = Matrix::Zero(2, 2);
    const int sims = 200;
    for (int k = 0; k < sims; ++k) {
      const Dataset sim = model.simulate(truth, split_seed(7008, static_cast<std::uint64_t>(k)));
      info -= numerical_hessian([&](const Vector& t) { return model.log_objective(t, sim); }, truth).matrix();
    }
    info /= sims;
    const double qe = rel_frobenius(q, info);
    v.check(qe < 0.10, fmt("plug-in Q vs Monte Carlo observed information (200 sims): relative error %.4f (limit 0.10)",
                           qe));
  }
  return v.pass();
}

bool determinism(const Context& ctx) {
  Verdict v;
  const fs::path dir = ctx.out_dir / "determinism";
  fs::create_directories(dir);
  auto same_files = [](const fs::path& a, const fs::path& b) { return read_text(a) == read_text(b); };

  for (Scenario s : {Scenario::exact_gaussian_oracle, Scenario::tapered_gp, Scenario::pairwise_gaussian,
                     Scenario::tapered_gp_linear_gibbs}) {
    ExperimentConfig c = ExperimentConfig::defaults(s);
    c.n_datasets = 3;
    c.grid_size = 8;
    c.chain.iterations = 2000;
    c.chain.burn_in = 500;
    c.bootstrap_k = 50;
    c.master_seed = split_seed(ctx.seed, 8);
    const std::string name = to_string(s);
    c.threads = 1;
    write_text(dir / (name + "_a.csv"), coverage_csv(run_coverage_experiment(c)));
    c.threads = std::max(2u, ctx.threads);
    write_text(dir / (name + "_b.csv"), coverage_csv(run_coverage_experiment(c)));
    v.check(same_files(dir / (name + "_a.csv"), dir / (name + "_b.csv")),
            name + ": coverage table identical across reruns and thread counts");
  }

  PoissonDemoConfig pc = PoissonDemoConfig::defaults();
  pc.iterations = 1500;
  pc.burn_in = 500;
  pc.seed = split_seed(ctx.seed, 9);
  for (const char* tag : {"a", "b"}) {
    const PoissonDemoResult r = run_poisson_demo(pc);
    write_chain(r.raw, dir / (std::string("poisson_raw_") + tag + ".csv"));
    write_chain(r.adjusted, dir / (std::string("poisson_ofs_") + tag + ".csv"));
    write_text(dir / (std::string("poisson_summary_") + tag + ".json"), r.summary.dump(2));
  }
  bool same = true;
  for (const char* f : {"poisson_raw_", "poisson_ofs_"}) {
    const fs::path a = dir / (std::string(f) + "a.csv");
    const fs::path b = dir / (std::string(f) + "b.csv");
    same = same && same_files(a, b) && same_files(chain_metadata_path(a), chain_metadata_path(b));
  }
  same = same && same_files(dir / "poisson_summary_a.json", dir / "poisson_summary_b.json");
  v.check(same, "Poisson demo: chains, metadata and summary identical across reruns");
  return v.pass();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  Context ctx;
  std::string out = "acceptance_output";
  std::vector<int> only;
  ctx.threads = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--out-dir", out, "directory for coverage tables and chains");
  app.add_option("--threads", ctx.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--only", only, "criterion numbers to run")->delimiter(',');
  app.add_flag("--quick", ctx.quick, "20 datasets per coverage scenario (not the acceptance scale)");
  CLI11_PARSE(app, argc, argv);
  ctx.out_dir = out;
  fs::create_directories(ctx.out_dir);
  const std::set<int> wanted(only.begin(), only.end());
  auto want = [&](int k) { return wanted.empty() || wanted.count(k) > 0; };

  std::map<int, std::pair<std::string, bool>> results;
  auto run = [&](int k, const std::string& title, const std::function<bool()>& f) {
    std::printf("criterion %d: %s\n", k, title.c_str());
    std::fflush(stdout);
    bool ok = false;
    try {
      ok = f();
    } catch (const std::exception& e) {
      std::printf("    FAIL exception: %s\n", e.what());
    }
    results[k] = {title, ok};
    std::printf("[%s] %d %s%s\n", ok ? "PASS" : "FAIL", k, title.c_str(), ctx.quick ? " (quick scale)" : "");
    std::fflush(stdout);
  };

  if (want(1)) run(1, "Omega algebra", [&] { return omega_algebra(ctx); });
  if (want(7)) run(7, "differential oracles", [&] { return differential_oracles(ctx); });
  if (want(2)) run(2, "oracle calibration", [&] { return oracle_calibration(ctx); });
  if (want(6)) run(6, "Gibbs propagation", [&] { return gibbs_propagation(ctx); });
  if (want(8)) run(8, "determinism", [&] { return determinism(ctx); });
  std::optional<ScenarioRun> pairwise;
  std::optional<ScenarioRun> tapered;
  if (want(4) || want(5)) {
    try {
      pairwise = run_scenario(ctx, Scenario::pairwise_gaussian, "pairwise", 4);
    } catch (const std::exception& e) {
      std::printf("    pairwise experiment failed: %s\n", e.what());
    }
  }
  if (want(4)) run(4, "pairwise coverage", [&] { return pairwise && pairwise_coverage(ctx, *pairwise); });
  if (want(3) || want(5)) {
    try {
      tapered = run_scenario(ctx, Scenario::tapered_gp, "tapered", 3);
    } catch (const std::exception& e) {
      std::printf("    tapered experiment failed: %s\n", e.what());
    }
  }
  if (want(3)) run(3, "tapered-GP coverage", [&] { return tapered && tapered_coverage(ctx, *tapered); });
  if (want(5)) run(5, "curvature parity", [&] { return tapered && pairwise && curvature_parity(*tapered, *pairwise); });

  std::printf("\nsummary\n");
  bool all = true;
  for (const auto& [k, r] : results) {
    std::printf("[%s] %d %s\n", r.second ? "PASS" : "FAIL", k, r.first.c_str());
    all = all && r.second;
  }
  return all ? 0 : 1;
}
