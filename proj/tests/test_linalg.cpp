#include <cmath>
#include <vector>

#include "doctest.h"
#include "ofs/errors.hpp"
#include "ofs/linalg.hpp"
#include "ofs/rng.hpp"
#include "test_util.hpp"

using namespace ofs;
using testutil::max_abs;

TEST_CASE("SymMatrix stores exactly symmetric entries") {
  Rng rng(3);
  const Matrix a = testutil::random_matrix(rng, 4, 4);
  const SymMatrix s(a);
  CHECK(max_abs(s.matrix() - s.matrix().transpose()) == 0.0);
  CHECK(max_abs(s.matrix() - 0.5 * (a + a.transpose())) < 1e-15);
}

TEST_CASE("SpdMatrix refuses non-positive-definite input and names the eigenvalue") {
  Matrix a(2, 2);
  a << 1.0, 0.0, 0.0, -2.0;
  try {
    SpdMatrix s{a};
    FAIL("accepted an indefinite matrix");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("-2") != std::string::npos);
  }
  Matrix tiny = Matrix::Identity(2, 2);
  tiny(1, 1) = 1e-14;
  CHECK_THROWS_AS(SpdMatrix{tiny}, DomainError);
}

TEST_CASE("spd_sqrt") {
  SUBCASE("identity and diagonal cases") {
    CHECK(max_abs(spd_sqrt(SpdMatrix::identity(3)).matrix() - Matrix::Identity(3, 3)) < 1e-15);
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 4.0;
    d(1, 1) = 9.0;
    const Matrix s = spd_sqrt(SpdMatrix(d)).matrix();
    CHECK(s(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(s(1, 1) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(std::abs(s(0, 1)) < 1e-15);
  }
  SUBCASE("multiply-back on random 5x5") {
    Rng rng(11);
    for (int rep = 0; rep < 20; ++rep) {
      const Matrix a = testutil::random_spd(rng, 5);
      const Matrix s = spd_sqrt(SpdMatrix(a)).matrix();
      CHECK(max_abs(s * s - a) < 1e-10);
      CHECK(max_abs(s - s.transpose()) == 0.0);
    }
  }
  SUBCASE("multiply-back up to condition number 1e8") {
    Rng rng(12);
    for (double cond : {1e2, 1e4, 1e6, 1e8}) {
      Vector e(4);
      e << 1.0, std::sqrt(1.0 / cond), 0.5, 1.0 / cond;
      const Matrix a = testutil::random_spd(rng, e);
      const Matrix s = spd_sqrt(SpdMatrix(a)).matrix();
      CHECK(max_abs(s * s - a) < 1e-10);
    }
  }
  SUBCASE("commutes with orthogonal conjugation") {
    Rng rng(13);
    for (int rep = 0; rep < 10; ++rep) {
      const Matrix a = testutil::random_spd(rng, 4);
      const Matrix u = testutil::random_orthogonal(rng, 4);
      const Matrix lhs = spd_sqrt(SpdMatrix(Matrix(u * a * u.transpose()))).matrix();
      const Matrix rhs = u * spd_sqrt(SpdMatrix(a)).matrix() * u.transpose();
      CHECK(max_abs(lhs - rhs) < 1e-9);
    }
  }
}

TEST_CASE("spd_inverse") {
  CHECK(max_abs(spd_inverse(SpdMatrix::identity(3)).matrix() - Matrix::Identity(3, 3)) < 1e-15);
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 2.0;
  d(1, 1) = 4.0;
  const Matrix inv = spd_inverse(SpdMatrix(d)).matrix();
  CHECK(inv(0, 0) == doctest::Approx(0.5));
  CHECK(inv(1, 1) == doctest::Approx(0.25));
  Rng rng(21);
  for (int rep = 0; rep < 10; ++rep) {
    const Matrix a = testutil::random_spd(rng, 6);
    CHECK(max_abs(a * spd_inverse(SpdMatrix(a)).matrix() - Matrix::Identity(6, 6)) < 1e-10);
  }
  SUBCASE("near-singular input reports the condition estimate") {
    Vector e(2);
    e << 1.0, 1e-11;
    const Matrix a = testutil::random_spd(rng, e);
    try {
      spd_inverse(SpdMatrix(a));
      FAIL("inverted a matrix with condition 1e11");
    } catch (const ConditioningError& err) {
      CHECK(err.condition_estimate() == doctest::Approx(1e11).epsilon(1e-3));
    }
  }
}

TEST_CASE("sample_covariance") {
  SUBCASE("identical rows give zero") {
    Matrix x(5, 3);
    x.rowwise() = Eigen::RowVector3d(1.0, -2.0, 3.0);
    CHECK(max_abs(sample_covariance(x).matrix()) == 0.0);
  }
  SUBCASE("rows {0, 2} in one dimension") {
    Matrix x(2, 1);
    x << 0.0, 2.0;
    CHECK(sample_covariance(x)(0, 0) == doctest::Approx(2.0));
  }
  SUBCASE("fewer than two rows") { CHECK_THROWS_AS(sample_covariance(Matrix::Zero(1, 2)), DomainError); }
  SUBCASE("standard normal rows") {
    Rng rng(31);
    const Matrix x = testutil::random_matrix(rng, 100000, 3);
    CHECK(max_abs(sample_covariance(x).matrix() - Matrix::Identity(3, 3)) < 0.05);
  }
  SUBCASE("row permutation invariance and affine equivariance") {
    Rng rng(32);
    const Matrix x = testutil::random_matrix(rng, 200, 3);
    Matrix perm = x;
    for (Eigen::Index i = 0; i < perm.rows(); ++i) perm.row(i) = x.row(perm.rows() - 1 - i);
    CHECK(max_abs(sample_covariance(perm).matrix() - sample_covariance(x).matrix()) < 1e-13);
    const Matrix a = testutil::random_matrix(rng, 3, 3);
    const Eigen::RowVector3d b(1.0, 2.0, -5.0);
    Matrix y = x * a.transpose();
    y.rowwise() += b;
    const Matrix expected = a * sample_covariance(x).matrix() * a.transpose();
    CHECK(max_abs(sample_covariance(y).matrix() - expected) < 1e-12);
  }
}

TEST_CASE("numerical_gradient") {
  const Vector t = Eigen::Vector2d(1.0, 2.0);
  CHECK(max_abs(numerical_gradient([](const Vector&) { return 3.5; }, t)) == 0.0);
  const Vector g = numerical_gradient([](const Vector& x) { return x.squaredNorm(); }, t);
  CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(g[1] == doctest::Approx(4.0).epsilon(1e-6));
  SUBCASE("steps follow max(|theta|, 1) eps^(1/3)") {
    const Vector h = default_gradient_steps(Eigen::Vector2d(0.1, -30.0));
    const double e3 = std::cbrt(std::numeric_limits<double>::epsilon());
    CHECK(h[0] == doctest::Approx(e3));
    CHECK(h[1] == doctest::Approx(30.0 * e3));
  }
  SUBCASE("non-finite evaluations carry the failing point") {
    try {
      numerical_gradient([](const Vector& x) { return x[0] > 1.0 ? NAN : 0.0; }, t);
      FAIL("no error");
    } catch (const DomainError& e) {
      CHECK(std::string(e.what()).find("1.0000") != std::string::npos);
    }
  }
}

TEST_CASE("numerical_hessian") {
  Matrix m(2, 2);
  m << 2.0, 0.5, 0.5, 1.0;
  const Vector t = Eigen::Vector2d(0.3, -0.7);
  const SymMatrix h = numerical_hessian([&](const Vector& x) { return x.dot(m * x); }, t);
  CHECK(max_abs(h.matrix() - 2.0 * m) < 1e-4);
  CHECK(max_abs(h.matrix() - h.matrix().transpose()) == 0.0);
  const SymMatrix z = numerical_hessian([](const Vector& x) { return 3.0 * x[0] - x[1]; }, t);
  CHECK(max_abs(z.matrix()) < 1e-6);
  SUBCASE("second differences are O(h^2) accurate") {
    const auto f = [](const Vector& x) { return std::sin(x[0]) * std::exp(x[1]); };
    const Vector at = Eigen::Vector2d(0.4, 0.2);
    Matrix exact(2, 2);
    exact << -std::sin(0.4) * std::exp(0.2), std::cos(0.4) * std::exp(0.2),
        std::cos(0.4) * std::exp(0.2), std::sin(0.4) * std::exp(0.2);
    CHECK(max_abs(numerical_hessian(f, at).matrix() - exact) < 1e-6);
  }
}

TEST_CASE("empirical_quantile") {
  const std::vector<double> v{5.0, 1.0, 3.0, 2.0, 4.0};
  CHECK(empirical_quantile(v, 0.5) == 3.0);
  CHECK(empirical_quantile(v, 0.0) == 1.0);
  CHECK(empirical_quantile(v, 1.0) == 5.0);
  CHECK(empirical_quantile(v, 0.1) == doctest::Approx(1.4));
  CHECK_THROWS_AS(empirical_quantile(std::vector<double>{}, 0.5), DomainError);
  CHECK_THROWS_AS(empirical_quantile(v, 1.5), DomainError);
  SUBCASE("monotone in p") {
    Rng rng(41);
    std::vector<double> x(101);
    for (double& xi : x) xi = uniform01(rng);
    double prev = -1.0;
    for (int k = 0; k <= 100; ++k) {
      const double q = empirical_quantile(x, k / 100.0);
      CHECK(q >= prev);
      prev = q;
    }
  }
  SUBCASE("uniform draws") {
    Rng rng(42);
    std::vector<double> x(1000000);
    for (double& xi : x) xi = uniform01(rng);
    CHECK(std::abs(empirical_quantile(x, 0.9) - 0.9) < 0.005);
  }
}
