#include <algorithm>
#include <cmath>
#include <filesystem>

#include <unistd.h>

#include "doctest.h"
#include "ofs/coverage.hpp"
#include "ofs/errors.hpp"
#include "ofs/io.hpp"

using namespace ofs;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_oracle(int n) {
  ExperimentConfig c = ExperimentConfig::defaults(Scenario::exact_gaussian_oracle);
  c.n_datasets = n;
  c.master_seed = 11;
  c.chain.iterations = 3000;
  c.chain.burn_in = 500;
  return c;
}

bool same_table(const CoverageTable& a, const CoverageTable& b) { return coverage_csv(a) == coverage_csv(b); }

}  // namespace

TEST_CASE("mc_stderr") {
  CHECK(mc_stderr(0.5, 100) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(mc_stderr(0.0, 37) == 0.0);
  CHECK(mc_stderr(1.0, 37) == 0.0);
  CHECK(mc_stderr(0.9, 1000) == doctest::Approx(0.0094868).epsilon(1e-5));
  CHECK_THROWS_AS(mc_stderr(0.5, 0), DomainError);
}

TEST_CASE("config validation") {
  ExperimentConfig c = small_oracle(2);
  CHECK_NOTHROW(c.validate());
  SUBCASE("dataset count") { c.n_datasets = 0; }
  SUBCASE("alpha grid") { c.alpha_grid = {0.1, 1.0}; }
  SUBCASE("burn-in") { c.chain.burn_in = c.chain.iterations; }
  SUBCASE("adjusted methods need combos") { c.combos.clear(); }
  SUBCASE("no curvature under Gibbs") {
    c = ExperimentConfig::defaults(Scenario::tapered_gp_linear_gibbs);
    c.methods.push_back(Method::curvature);
  }
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(scenario_from_string("tapered"), ConfigError);
  CHECK_THROWS_AS(method_from_string("sandwich"), ConfigError);
  CHECK(method_from_string(to_string(Method::curvature)) == Method::curvature);
}

TEST_CASE("table structure and rendering") {
  ExperimentConfig c = ExperimentConfig::defaults(Scenario::pairwise_gaussian);
  c.n_datasets = 2;
  c.chain.iterations = 1500;
  c.chain.burn_in = 300;
  c.bootstrap_k = 50;
  c.alpha_grid = {0.1, 0.5};
  const CoverageTable t = run_coverage_experiment(c);
  CHECK(t.rows.size() == 2 * 3 * 4 * 2);
  for (const CoverageRow& r : t.rows) {
    CHECK(r.empirical >= 0.0);
    CHECK(r.empirical <= 1.0);
    CHECK(r.n_effective + r.failures == 2);
    if (r.n_effective > 0) CHECK(r.mc_stderr == mc_stderr(r.empirical, r.n_effective));
  }
  // Rows run combo, method, coordinate, nominal.
  CHECK(t.rows[0].method == "raw");
  CHECK(t.rows[0].coordinate == "sigma2");
  CHECK(t.rows[0].nominal == doctest::Approx(0.9));
  CHECK(t.rows[1].nominal == doctest::Approx(0.5));
  CHECK(t.rows[2].coordinate == "c");
  CHECK(t.rows[4].method == "ofs");
  CHECK(t.rows[12].q_method == t.rows[0].q_method);
  CHECK(t.rows[12].p_method != t.rows[0].p_method);
  CHECK(t.select("c", "ofs").size() == 2 * 4);
  CHECK(t.select("", "curvature", "bootstrap", "hessian").size() == 4);

  const std::string curve = coverage_curve_csv(t);
  CHECK(curve.rfind("scenario,coordinate,series,nominal,empirical,lower,upper\n", 0) == 0);
  // Raw curves repeat per combo in the table but appear once here.
  const long raw_repeats = 3 * 2 * 2;
  CHECK(std::count(curve.begin(), curve.end(), '\n') == static_cast<long>(t.rows.size()) - raw_repeats + 1);
  CHECK(curve.find("ofs:bootstrap/hessian") != std::string::npos);
  CHECK_FALSE(coverage_text(t).empty());

  SUBCASE("CSV round trip") {
    const fs::path path = fs::temp_directory_path() / ("ofs_cov_" + std::to_string(::getpid()) + ".csv");
    write_text(path, coverage_csv(t));
    const CoverageTable back = coverage_from_csv(path);
    fs::remove(path);
    CHECK(coverage_csv(back) == coverage_csv(t));
  }
  SUBCASE("empty method subset gives a header-only CSV") {
    ExperimentConfig e = small_oracle(1);
    e.methods.clear();
    const std::string csv = coverage_csv(run_coverage_experiment(e));
    CHECK(csv == "scenario,coordinate,method,p_method,q_method,nominal,empirical,mc_stderr,n_effective,failures\n");
  }
}

TEST_CASE("failed estimates are counted, not dropped") {
  // Two retained draws give a rank-one chain covariance, so Q from the chain
  // is singular and every adjusted cell fails while raw intervals survive.
  ExperimentConfig c = small_oracle(3);
  c.chain.iterations = 3;
  c.chain.burn_in = 1;
  const CoverageTable t = run_coverage_experiment(c);
  for (const CoverageRow& r : t.select("", "raw")) CHECK(r.failures == 0);
  for (const CoverageRow& r : t.select("", "ofs")) {
    CHECK(r.failures == 3);
    CHECK(r.n_effective == 0);
    CHECK(std::isnan(r.empirical));
  }
  REQUIRE(t.failure_log.size() == 3);
  CHECK(t.failure_log[0].rfind("dataset 0, ofs moment/chain_cov: ", 0) == 0);
}

TEST_CASE("determinism across runs and thread counts") {
  ExperimentConfig c = small_oracle(6);
  const CoverageTable a = run_coverage_experiment(c);
  CHECK(same_table(a, run_coverage_experiment(c)));
  c.threads = 3;
  CHECK(same_table(a, run_coverage_experiment(c)));
  c.master_seed = 12;
  CHECK_FALSE(same_table(a, run_coverage_experiment(c)));
}

TEST_CASE("coverage is nondecreasing in the nominal level") {
  ExperimentConfig c = ExperimentConfig::defaults(Scenario::tapered_gp);
  c.grid_size = 6;
  c.taper_range = 2.0;
  c.n_datasets = 4;
  c.chain.iterations = 1500;
  c.chain.burn_in = 300;
  c.alpha_grid = {0.5, 0.33, 0.2, 0.1, 0.05, 0.01};
  const CoverageTable t = run_coverage_experiment(c);
  for (std::size_t k = 0; k + 1 < t.rows.size(); ++k) {
    const CoverageRow& a = t.rows[k];
    const CoverageRow& b = t.rows[k + 1];
    if (a.coordinate != b.coordinate || a.method != b.method || a.p_method != b.p_method || a.q_method != b.q_method)
      continue;
    REQUIRE(b.nominal > a.nominal);
    CHECK(b.empirical >= a.empirical);
  }
}

TEST_CASE("exact likelihood calibrates raw intervals") {
  ExperimentConfig c = ExperimentConfig::defaults(Scenario::exact_gaussian_oracle);
  c.n_datasets = 200;
  c.master_seed = 5;
  const CoverageTable t = run_coverage_experiment(c);
  for (const CoverageRow& r : t.rows) {
    CAPTURE(r.coordinate);
    CAPTURE(r.method);
    CAPTURE(r.nominal);
    REQUIRE(r.n_effective == 200);
    // Binomial error at the nominal level, so a 0.99 cell is not judged by a
    // zero observed stderr.
    CHECK(std::abs(r.empirical - r.nominal) <= 3.0 * mc_stderr(r.nominal, r.n_effective));
  }
}
