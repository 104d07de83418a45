#include "ofs/gp_taper.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseCore>

#include "ofs/errors.hpp"

namespace ofs {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw DomainError(std::string(what) + " must be positive and finite, got " + std::to_string(v));
  }
}

}  // namespace

// Covariance families -------------------------------------------------------

double cov_exponential(double sigma2, double c, double h) {
  require_positive(sigma2, "sigma2");
  require_positive(c, "c");
  if (!(h >= 0.0)) throw DomainError("distance must be nonnegative");
  return sigma2 * std::exp(-(c / sigma2) * h);
}

double cov_gneiting(const GneitingParams& p, double h, double u) {
  require_positive(p.sigma2, "sigma2");
  require_positive(p.c, "c");
  require_positive(p.a, "a");
  if (!(p.omega >= 0.0 && p.omega <= 1.0)) throw DomainError("omega must lie in [0, 1]");
  if (!(p.alpha > 0.0 && p.alpha <= 1.0)) throw DomainError("alpha must lie in (0, 1]");
  if (!(p.gamma > 0.0 && p.gamma <= 1.0)) throw DomainError("gamma must lie in (0, 1]");
  if (!(h >= 0.0 && u >= 0.0)) throw DomainError("lags must be nonnegative");
  const double psi = p.a * std::pow(u, 2.0 * p.alpha) + 1.0;
  const double s = (p.c / p.sigma2) * std::pow(h, 2.0 * p.gamma) / std::pow(psi, p.omega * p.gamma);
  return p.sigma2 / (psi * psi) * std::exp(-s);
}

CovarianceFamily::CovarianceFamily(CovarianceKind kind, bool nugget, double alpha, double gamma)
    : kind_(kind), nugget_(nugget), alpha_(alpha), gamma_(gamma) {
  if (kind == CovarianceKind::exponential) {
    layout_ = ParamLayout({"sigma2", "c"}, {Support::positive, Support::positive});
  } else {
    layout_ = ParamLayout({"sigma2", "a", "c", "omega"},
                          {Support::positive, Support::positive, Support::positive,
                           Support::unit_interval});
  }
  if (nugget) {
    layout_.names.push_back("nugget");
    layout_.supports.push_back(Support::positive);
  }
}

CovarianceFamily CovarianceFamily::exponential(bool nugget) {
  return CovarianceFamily(CovarianceKind::exponential, nugget, 1.0, 0.5);
}

CovarianceFamily CovarianceFamily::gneiting(bool nugget, double alpha, double gamma) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in (0, 1]");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw DomainError("gamma must lie in (0, 1]");
  return CovarianceFamily(CovarianceKind::gneiting, nugget, alpha, gamma);
}

GneitingParams CovarianceFamily::gneiting_params(const Vector& t) const {
  return GneitingParams{t[0], t[1], t[2], t[3], alpha_, gamma_};
}

void CovarianceFamily::validate(const Vector& theta) const {
  if (theta.size() != layout_.size()) {
    throw DimensionMismatch("covariance family expects " + std::to_string(layout_.size()) +
                            " parameters, got " + std::to_string(theta.size()));
  }
  if (kind_ == CovarianceKind::exponential) {
    require_positive(theta[0], "sigma2");
    require_positive(theta[1], "c");
  } else {
    require_positive(theta[0], "sigma2");
    require_positive(theta[1], "a");
    require_positive(theta[2], "c");
    if (!(theta[3] >= 0.0 && theta[3] <= 1.0)) throw DomainError("omega must lie in [0, 1]");
  }
  if (nugget_ && !(theta[layout_.size() - 1] >= 0.0)) {
    throw DomainError("nugget must be nonnegative");
  }
}

double CovarianceFamily::value(const Vector& t, double h, double u) const {
  if (kind_ == CovarianceKind::exponential) {
    return t[0] * std::exp(-(t[1] / t[0]) * h);
  }
  const double psi = t[1] * std::pow(u, 2.0 * alpha_) + 1.0;
  const double s = (t[2] / t[0]) * std::pow(h, 2.0 * gamma_) * std::pow(psi, -t[3] * gamma_);
  return t[0] / (psi * psi) * std::exp(-s);
}

void CovarianceFamily::gradient(const Vector& t, double h, double u, double* grad) const {
  if (kind_ == CovarianceKind::exponential) {
    const double e = std::exp(-(t[1] / t[0]) * h);
    grad[0] = e * (1.0 + t[1] * h / t[0]);
    grad[1] = -h * e;
  } else {
    const double sigma2 = t[0];
    const double a = t[1];
    const double c = t[2];
    const double omega = t[3];
    const double u2a = std::pow(u, 2.0 * alpha_);
    const double psi = a * u2a + 1.0;
    const double h2g = std::pow(h, 2.0 * gamma_);
    const double psi_pow = std::pow(psi, -omega * gamma_);
    const double s = (c / sigma2) * h2g * psi_pow;
    const double cv = sigma2 / (psi * psi) * std::exp(-s);
    grad[0] = cv / sigma2 * (1.0 + s);
    grad[1] = cv * (-2.0 + omega * gamma_ * s) / psi * u2a;
    grad[2] = -cv * h2g * psi_pow / sigma2;
    grad[3] = cv * s * gamma_ * std::log(psi);
  }
  if (nugget_) grad[layout_.size() - 1] = 0.0;
}

// Tapers ----------------------------------------------------------------------

double wendland(double d, double range) {
  if (d >= range) return 0.0;
  const double x = d / range;
  const double one_minus = 1.0 - x;
  const double sq = one_minus * one_minus;
  return sq * sq * (4.0 * x + 1.0);
}

double taper_value(const TaperSpec& spec, double h, double u) {
  auto kernel = [&](double d, double range) {
    if (spec.kernel == TaperKernel::indicator) return d < range ? 1.0 : 0.0;
    return wendland(d, range);
  };
  double t = kernel(h, spec.spatial_range);
  if (spec.temporal_range) t *= kernel(u, *spec.temporal_range);
  return t;
}

Matrix grid_locations(Eigen::Index m, double spacing) {
  if (m < 1) throw DomainError("grid size must be at least 1");
  if (!(spacing > 0.0)) throw DomainError("grid spacing must be positive");
  Matrix locs(m * m, 2);
  for (Eigen::Index row = 0; row < m; ++row) {
    for (Eigen::Index col = 0; col < m; ++col) {
      locs(row * m + col, 0) = static_cast<double>(col) * spacing;
      locs(row * m + col, 1) = static_cast<double>(row) * spacing;
    }
  }
  return locs;
}

// Sparse storage --------------------------------------------------------------

SparseSymMatrix::SparseSymMatrix(Eigen::Index dim, std::vector<int> col_ptr,
                                 std::vector<int> row_idx, std::vector<double> values)
    : dim_(dim), col_ptr_(std::move(col_ptr)), row_idx_(std::move(row_idx)),
      values_(std::move(values)) {
  if (static_cast<Eigen::Index>(col_ptr_.size()) != dim_ + 1 ||
      row_idx_.size() != values_.size() ||
      static_cast<std::size_t>(col_ptr_.back()) != values_.size()) {
    throw DimensionMismatch("inconsistent compressed-column arrays");
  }
  for (Eigen::Index j = 0; j < dim_; ++j) {
    if (col_ptr_[j] == col_ptr_[j + 1] || row_idx_[col_ptr_[j]] != j) {
      throw DomainError("sparse symmetric storage must hold every diagonal entry first");
    }
  }
}

double SparseSymMatrix::fill_fraction() const {
  const double offdiag = static_cast<double>(values_.size() - static_cast<std::size_t>(dim_));
  return (2.0 * offdiag + static_cast<double>(dim_)) /
         (static_cast<double>(dim_) * static_cast<double>(dim_));
}

Matrix SparseSymMatrix::to_dense() const {
  Matrix out = Matrix::Zero(dim_, dim_);
  for (Eigen::Index j = 0; j < dim_; ++j) {
    for (int p = col_ptr_[j]; p < col_ptr_[j + 1]; ++p) {
      out(row_idx_[p], j) = values_[p];
      out(j, row_idx_[p]) = values_[p];
    }
  }
  return out;
}

double SparseSymMatrix::operator()(Eigen::Index i, Eigen::Index j) const {
  if (i < j) std::swap(i, j);
  const auto begin = row_idx_.begin() + col_ptr_[j];
  const auto end = row_idx_.begin() + col_ptr_[j + 1];
  const auto it = std::lower_bound(begin, end, static_cast<int>(i));
  if (it == end || *it != i) return 0.0;
  return values_[static_cast<std::size_t>(it - row_idx_.begin())];
}

Vector SparseSymMatrix::multiply(const Vector& x) const {
  Vector y = Vector::Zero(dim_);
  for (Eigen::Index j = 0; j < dim_; ++j) {
    y[j] += values_[col_ptr_[j]] * x[j];
    for (int p = col_ptr_[j] + 1; p < col_ptr_[j + 1]; ++p) {
      const int i = row_idx_[p];
      y[i] += values_[p] * x[j];
      y[j] += values_[p] * x[i];
    }
  }
  return y;
}

double SparseSymMatrix::quadratic_form(const Vector& x) const {
  double diag = 0.0;
  double off = 0.0;
  for (Eigen::Index j = 0; j < dim_; ++j) {
    diag += values_[col_ptr_[j]] * x[j] * x[j];
    for (int p = col_ptr_[j] + 1; p < col_ptr_[j + 1]; ++p) off += values_[p] * x[row_idx_[p]] * x[j];
  }
  return diag + 2.0 * off;
}

// TaperedGp -------------------------------------------------------------------

TaperedGp::TaperedGp(CovarianceFamily family, TaperSpec taper, Matrix locations, Vector times)
    : family_(std::move(family)),
      taper_(taper),
      locations_(std::move(locations)),
      times_(std::move(times)),
      n_(locations_.rows()) {
  if (n_ < 1 || locations_.cols() != 2) throw DimensionMismatch("locations must be n x 2, n >= 1");
  if (times_.size() != 0 && times_.size() != n_) {
    throw DimensionMismatch("times must have one entry per location");
  }
  require_positive(taper_.spatial_range, "spatial taper range");
  if (taper_.temporal_range) require_positive(*taper_.temporal_range, "temporal taper range");

  // Pattern: lower triangle, diagonal first in each column.
  col_ptr_.assign(static_cast<std::size_t>(n_) + 1, 0);
  for (Eigen::Index j = 0; j < n_; ++j) {
    for (Eigen::Index i = j; i < n_; ++i) {
      const double h = lag_space(i, j);
      const double u = lag_time(i, j);
      const double t = (i == j) ? 1.0 : taper_value(taper_, h, u);
      if (t > 0.0) {
        row_idx_.push_back(static_cast<int>(i));
        lag_h_.push_back(h);
        lag_u_.push_back(u);
        taper_w_.push_back(t);
        is_diag_.push_back(i == j ? 1 : 0);
      }
    }
    col_ptr_[j + 1] = static_cast<int>(row_idx_.size());
  }
  const auto nnz = row_idx_.size();

  // Fill-reducing ordering on the full symmetric pattern.
  {
    std::vector<Eigen::Triplet<double, int>> trips;
    trips.reserve(2 * nnz);
    for (Eigen::Index j = 0; j < n_; ++j) {
      for (int p = col_ptr_[j]; p < col_ptr_[j + 1]; ++p) {
        trips.emplace_back(row_idx_[p], static_cast<int>(j), 1.0);
        if (row_idx_[p] != j) trips.emplace_back(static_cast<int>(j), row_idx_[p], 1.0);
      }
    }
    Eigen::SparseMatrix<double, Eigen::ColMajor, int> pattern(n_, n_);
    pattern.setFromTriplets(trips.begin(), trips.end());
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> amd_perm;
    Eigen::AMDOrdering<int> amd;
    amd(pattern, amd_perm);
    perm_.assign(amd_perm.indices().data(), amd_perm.indices().data() + n_);
    perm_inv_.assign(static_cast<std::size_t>(n_), 0);
    for (int k = 0; k < n_; ++k) perm_inv_[perm_[k]] = k;
  }

  // Upper triangle of the permuted matrix by column, pointing back to pattern entries.
  entry_pi_.resize(nnz);
  entry_pj_.resize(nnz);
  std::vector<int> counts(static_cast<std::size_t>(n_), 0);
  for (Eigen::Index j = 0; j < n_; ++j) {
    for (int p = col_ptr_[j]; p < col_ptr_[j + 1]; ++p) {
      const int a = perm_inv_[row_idx_[p]];
      const int b = perm_inv_[j];
      entry_pi_[p] = std::max(a, b);
      entry_pj_[p] = std::min(a, b);
      ++counts[entry_pi_[p]];
    }
  }
  ap_.assign(static_cast<std::size_t>(n_) + 1, 0);
  for (Eigen::Index k = 0; k < n_; ++k) ap_[k + 1] = ap_[k] + counts[k];
  ai_.resize(nnz);
  a_entry_.resize(nnz);
  std::vector<int> next(ap_.begin(), ap_.end() - 1);
  for (std::size_t p = 0; p < nnz; ++p) {
    const int col = entry_pi_[p];
    ai_[next[col]] = entry_pj_[p];
    a_entry_[next[col]] = static_cast<int>(p);
    ++next[col];
  }

  // Symbolic LDL': elimination tree and column counts.
  parent_.assign(static_cast<std::size_t>(n_), -1);
  std::vector<int> flag(static_cast<std::size_t>(n_));
  std::vector<int> lnz(static_cast<std::size_t>(n_), 0);
  for (int k = 0; k < n_; ++k) {
    flag[k] = k;
    for (int p = ap_[k]; p < ap_[k + 1]; ++p) {
      int i = ai_[p];
      if (i < k) {
        for (; flag[i] != k; i = parent_[i]) {
          if (parent_[i] == -1) parent_[i] = k;
          ++lnz[i];
          flag[i] = k;
        }
      }
    }
  }
  l_ptr_.assign(static_cast<std::size_t>(n_) + 1, 0);
  for (int k = 0; k < n_; ++k) l_ptr_[k + 1] = l_ptr_[k] + lnz[k];
}

double TaperedGp::lag_space(Eigen::Index i, Eigen::Index j) const {
  return (locations_.row(i) - locations_.row(j)).norm();
}

double TaperedGp::lag_time(Eigen::Index i, Eigen::Index j) const {
  return times_.size() == 0 ? 0.0 : std::abs(times_[i] - times_[j]);
}

double TaperedGp::fill_fraction() const {
  const double offdiag = static_cast<double>(row_idx_.size() - static_cast<std::size_t>(n_));
  return (2.0 * offdiag + static_cast<double>(n_)) /
         (static_cast<double>(n_) * static_cast<double>(n_));
}

std::vector<double> TaperedGp::pattern_covariance(const Vector& theta) const {
  std::vector<double> v(row_idx_.size());
  const double nugget = family_.nugget(theta);
  for (std::size_t p = 0; p < v.size(); ++p) {
    v[p] = family_.value(theta, lag_h_[p], lag_u_[p]);
    if (is_diag_[p]) v[p] += nugget;
  }
  return v;
}

SparseSymMatrix TaperedGp::tapered_covariance(const Vector& theta) const {
  family_.validate(theta);
  std::vector<double> v = pattern_covariance(theta);
  for (std::size_t p = 0; p < v.size(); ++p) v[p] *= taper_w_[p];
  return SparseSymMatrix(n_, col_ptr_, row_idx_, std::move(v));
}

TaperedFactor TaperedGp::factor(const Vector& theta) const {
  family_.validate(theta);
  const std::vector<double> cov = pattern_covariance(theta);
  const auto n = static_cast<std::size_t>(n_);

  // Up-looking numeric LDL' on the permuted matrix.
  const auto lsize = static_cast<std::size_t>(l_ptr_[n]);
  std::vector<int> li(lsize);
  std::vector<double> lx(lsize);
  std::vector<double> d(n);
  std::vector<double> y(n, 0.0);
  std::vector<int> pattern(n);
  std::vector<int> flag(n);
  std::vector<int> lnz(n, 0);
  for (int k = 0; k < n_; ++k) {
    int top = static_cast<int>(n_);
    flag[k] = k;
    for (int p = ap_[k]; p < ap_[k + 1]; ++p) {
      int i = ai_[p];
      const int e = a_entry_[p];
      y[i] += cov[e] * taper_w_[e];
      int len = 0;
      for (; flag[i] != k; i = parent_[i]) {
        pattern[len++] = i;
        flag[i] = k;
      }
      while (len > 0) pattern[--top] = pattern[--len];
    }
    d[k] = y[k];
    y[k] = 0.0;
    for (; top < n_; ++top) {
      const int i = pattern[top];
      const double yi = y[i];
      y[i] = 0.0;
      const int p2 = l_ptr_[i] + lnz[i];
      int p = l_ptr_[i];
      for (; p < p2; ++p) y[li[p]] -= lx[p] * yi;
      const double l_ki = yi / d[i];
      d[k] -= l_ki * yi;
      li[p] = k;
      lx[p] = l_ki;
      ++lnz[i];
    }
    if (!(d[k] > 0.0) || !std::isfinite(d[k])) {
      throw DomainError("tapered covariance is not positive definite (pivot " + std::to_string(k) +
                        " = " + std::to_string(d[k]) + ")");
    }
  }

  TaperedFactor out;
  for (std::size_t k = 0; k < n; ++k) out.log_det += std::log(d[k]);

  // Selected inverse on the filled pattern (Takahashi recurrences), lower
  // triangle of a dense workspace; only pattern positions are touched.
  thread_local Matrix z;
  if (z.rows() != n_) z.resize(n_, n_);
  for (int j = n_ - 1; j >= 0; --j) {
    const int begin = l_ptr_[j];
    const int end = begin + lnz[j];
    for (int a = begin; a < end; ++a) {
      const int i = li[a];
      double acc = 0.0;
      for (int b = begin; b < end; ++b) {
        const int k = li[b];
        acc += lx[b] * (k >= i ? z(k, i) : z(i, k));
      }
      z(i, j) = -acc;
    }
    double diag = 1.0 / d[j];
    for (int b = begin; b < end; ++b) diag -= lx[b] * z(li[b], j);
    z(j, j) = diag;
  }

  const std::size_t nnz = row_idx_.size();
  out.restricted_inverse.resize(nnz);
  out.b_values.resize(nnz);
  for (std::size_t p = 0; p < nnz; ++p) {
    out.restricted_inverse[p] = z(entry_pi_[p], entry_pj_[p]);
    out.b_values[p] = out.restricted_inverse[p] * taper_w_[p];
  }
  return out;
}

SparseSymMatrix TaperedGp::tapered_precision(const Vector& theta) const {
  family_.validate(theta);
  TaperedFactor f = factor(theta);
  return SparseSymMatrix(n_, col_ptr_, row_idx_, std::move(f.b_values));
}

double TaperedGp::loglik(const Vector& theta, const Vector& r) const {
  if (r.size() != n_) throw DimensionMismatch("residual length does not match the design");
  return loglik(factor(theta), r);
}

double TaperedGp::loglik(const TaperedFactor& f, const Vector& r) const {
  if (r.size() != n_) throw DimensionMismatch("residual length does not match the design");
  double diag = 0.0;
  double off = 0.0;
  for (Eigen::Index j = 0; j < n_; ++j) {
    const int p0 = col_ptr_[j];
    diag += f.b_values[p0] * r[j] * r[j];
    double col = 0.0;
    for (int p = p0 + 1; p < col_ptr_[j + 1]; ++p) col += f.b_values[p] * r[row_idx_[p]];
    off += col * r[j];
  }
  const double quad = diag + 2.0 * off;
  return -0.5 * static_cast<double>(n_) * kLog2Pi - 0.5 * f.log_det - 0.5 * quad;
}

Vector TaperedGp::precision_multiply(const TaperedFactor& f, const Vector& x) const {
  if (x.size() != n_) throw DimensionMismatch("vector length does not match the design");
  Vector y = Vector::Zero(n_);
  for (Eigen::Index j = 0; j < n_; ++j) {
    y[j] += f.b_values[col_ptr_[j]] * x[j];
    for (int p = col_ptr_[j] + 1; p < col_ptr_[j + 1]; ++p) {
      const int i = row_idx_[p];
      y[i] += f.b_values[p] * x[j];
      y[j] += f.b_values[p] * x[i];
    }
  }
  return y;
}

const TaperedFactor& TaperedFactorCache::get(const Vector& theta) {
  for (int k = 0; k < 2; ++k) {
    if (keys_[k].size() == theta.size() && keys_[k] == theta) return values_[k];
  }
  const int slot = next_;
  values_[slot] = gp_->factor(theta);
  keys_[slot] = theta;
  next_ = 1 - next_;
  return values_[slot];
}

Matrix TaperedGp::covariance_dense(const Vector& theta) const {
  return covariance_matrix(family_, theta, locations_, times_);
}

Matrix TaperedGp::covariance_derivative_dense(const Vector& theta, Eigen::Index k) const {
  const Eigen::Index p = family_.parameter_count();
  std::vector<double> grad(static_cast<std::size_t>(p));
  Matrix out(n_, n_);
  for (Eigen::Index j = 0; j < n_; ++j) {
    for (Eigen::Index i = j; i < n_; ++i) {
      family_.gradient(theta, lag_space(i, j), lag_time(i, j), grad.data());
      out(i, j) = out(j, i) = grad[static_cast<std::size_t>(k)];
    }
  }
  if (k == family_.nugget_index()) out.diagonal().array() += 1.0;
  return out;
}

Matrix TaperedGp::taper_dense() const {
  Matrix t(n_, n_);
  for (Eigen::Index j = 0; j < n_; ++j) {
    t(j, j) = 1.0;
    for (Eigen::Index i = j + 1; i < n_; ++i) {
      t(i, j) = t(j, i) = taper_value(taper_, lag_space(i, j), lag_time(i, j));
    }
  }
  return t;
}

double TaperedGp::loglik_dense(const Vector& theta, const Vector& r) const {
  const Matrix t = taper_dense();
  const Matrix a = covariance_dense(theta).cwiseProduct(t);
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) throw DomainError("tapered covariance is not positive definite");
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const Matrix b = llt.solve(Matrix::Identity(n_, n_)).cwiseProduct(t);
  return -0.5 * static_cast<double>(n_) * kLog2Pi - 0.5 * log_det - 0.5 * r.dot(b * r);
}

std::vector<Matrix> TaperedGp::score_matrices(const Vector& theta, const Matrix& a_inv) const {
  const Matrix t = taper_dense();
  std::vector<Matrix> m;
  for (Eigen::Index k = 0; k < family_.parameter_count(); ++k) {
    const Matrix da = covariance_derivative_dense(theta, k).cwiseProduct(t);
    m.push_back(-(a_inv * da * a_inv).cwiseProduct(t));
  }
  return m;
}

Vector TaperedGp::score(const Vector& theta, const Vector& r) const {
  family_.validate(theta);
  const Matrix t = taper_dense();
  const Matrix a = covariance_dense(theta).cwiseProduct(t);
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) throw DomainError("tapered covariance is not positive definite");
  const Matrix a_inv = llt.solve(Matrix::Identity(n_, n_));
  const Eigen::Index p = family_.parameter_count();
  Vector s(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    const Matrix da = covariance_derivative_dense(theta, k).cwiseProduct(t);
    const double trace = a_inv.cwiseProduct(da).sum();
    const Matrix w = (a_inv * da * a_inv).cwiseProduct(t);
    s[k] = -0.5 * trace + 0.5 * r.dot(w * r);
  }
  return s;
}

double TaperedGp::expected_loglik(const Vector& at, const Vector& truth) const {
  const TaperedFactor f = factor(at);
  const std::vector<double> sigma = pattern_covariance(truth);
  double trace = 0.0;
  for (std::size_t p = 0; p < sigma.size(); ++p) {
    trace += (is_diag_[p] ? 1.0 : 2.0) * f.b_values[p] * sigma[p];
  }
  return -0.5 * f.log_det - 0.5 * trace;
}

SpdMatrix TaperedGp::analytic_p(const Vector& theta) const {
  family_.validate(theta);
  const Matrix sigma = covariance_dense(theta);
  const Matrix a = sigma.cwiseProduct(taper_dense());
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) throw DomainError("tapered covariance is not positive definite");
  const Matrix a_inv = llt.solve(Matrix::Identity(n_, n_));
  const std::vector<Matrix> m = score_matrices(theta, a_inv);
  const auto p = static_cast<Eigen::Index>(m.size());
  std::vector<Matrix> g;
  for (const Matrix& mk : m) g.push_back(mk * sigma);
  Matrix pm(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      pm(i, j) = pm(j, i) = 0.5 * g[i].cwiseProduct(g[j].transpose()).sum();
    }
  }
  return SpdMatrix(pm);
}

SpdMatrix TaperedGp::analytic_q(const Vector& theta) const {
  family_.validate(theta);
  const SymMatrix h =
      numerical_hessian([&](const Vector& at) { return expected_loglik(at, theta); }, theta);
  return SpdMatrix(Matrix(-h.matrix()));
}

std::pair<SpdMatrix, SpdMatrix> TaperedGp::analytic_pq(const Vector& theta) const {
  return {analytic_p(theta), analytic_q(theta)};
}

// Free functions ----------------------------------------------------------------

double full_gaussian_loglik(const Matrix& sigma, const Vector& r) {
  if (sigma.rows() != r.size() || sigma.cols() != r.size()) {
    throw DimensionMismatch("covariance and residual dimensions differ");
  }
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) throw DomainError("covariance is not positive definite");
  const Matrix l = llt.matrixL();
  const double log_det = 2.0 * l.diagonal().array().log().sum();
  const Vector z = llt.matrixL().solve(r);
  return -0.5 * static_cast<double>(r.size()) * kLog2Pi - 0.5 * log_det - 0.5 * z.squaredNorm();
}

Matrix covariance_matrix(const CovarianceFamily& family, const Vector& theta,
                         const Matrix& locations, const Vector& times) {
  family.validate(theta);
  const Eigen::Index n = locations.rows();
  if (times.size() != 0 && times.size() != n) throw DimensionMismatch("times length mismatch");
  Matrix s(n, n);
  const double nugget = family.nugget(theta);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      const double h = (locations.row(i) - locations.row(j)).norm();
      const double u = times.size() == 0 ? 0.0 : std::abs(times[i] - times[j]);
      s(i, j) = s(j, i) = family.value(theta, h, u);
    }
    s(j, j) += nugget;
  }
  return s;
}

Vector gp_residual(const Dataset& data, const std::optional<Vector>& beta) {
  if (data.replicate_count() != 1) {
    throw DimensionMismatch("Gaussian-process likelihoods take a single realization");
  }
  Vector r = data.replicate(0);
  if (beta) {
    if (data.covariates.cols() != beta->size() || data.covariates.rows() != r.size()) {
      throw DimensionMismatch("covariates do not match the regression coefficients");
    }
    r -= data.covariates * *beta;
  }
  return r;
}

double full_gaussian_loglik(const CovarianceFamily& family, const Vector& theta,
                            const Dataset& data, const std::optional<Vector>& beta) {
  return full_gaussian_loglik(covariance_matrix(family, theta, data.locations, data.times),
                              gp_residual(data, beta));
}

double tapered_loglik(const CovarianceFamily& family, const TaperSpec& taper, const Vector& theta,
                      const Dataset& data, const std::optional<Vector>& beta) {
  family.validate(theta);
  TaperedGp gp(family, taper, data.locations, data.times);
  return gp.loglik(theta, gp_residual(data, beta));
}

Vector tapered_score(const CovarianceFamily& family, const TaperSpec& taper, const Vector& theta,
                     const Dataset& data, const std::optional<Vector>& beta) {
  TaperedGp gp(family, taper, data.locations, data.times);
  return gp.score(theta, gp_residual(data, beta));
}

std::pair<SpdMatrix, SpdMatrix> analytic_pq_tapered(const CovarianceFamily& family,
                                                    const TaperSpec& taper,
                                                    const Matrix& locations, const Vector& theta,
                                                    const Vector& times) {
  TaperedGp gp(family, taper, locations, times);
  return gp.analytic_pq(theta);
}

SparseSymMatrix build_tapered_matrix(const CovarianceFamily& family, const TaperSpec& taper,
                                     const Vector& theta, const Matrix& locations,
                                     const Vector& times) {
  TaperedGp gp(family, taper, locations, times);
  return gp.tapered_covariance(theta);
}

Dataset simulate_gp(const CovarianceFamily& family, const Vector& theta, const Matrix& locations,
                    std::uint64_t seed, const Vector& times,
                    const std::optional<Matrix>& covariates, const std::optional<Vector>& beta) {
  const Matrix sigma = covariance_matrix(family, theta, locations, times);
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) throw DomainError("covariance is not positive definite");
  Rng rng(seed);
  Vector y = llt.matrixL() * standard_normal_vector(rng, locations.rows());
  Dataset d;
  if (beta) {
    if (!covariates) throw DimensionMismatch("regression coefficients given without covariates");
    y += *covariates * *beta;
  }
  if (covariates) d.covariates = *covariates;
  d.observations = y.transpose();
  d.locations = locations;
  d.times = times;
  return d;
}

// GpModel ---------------------------------------------------------------------

GpModel::GpModel(TaperedGp gp, Objective objective, std::optional<Matrix> covariates,
                 std::optional<Vector> beta)
    : gp_(std::move(gp)), objective_(objective), covariates_(std::move(covariates)),
      beta_(std::move(beta)) {
  if (beta_ && (!covariates_ || covariates_->cols() != beta_->size() ||
                covariates_->rows() != gp_.size())) {
    throw DimensionMismatch("mean term needs an n x q covariate matrix matching beta");
  }
}

std::string GpModel::name() const {
  return objective_ == Objective::tapered ? "tapered_gp" : "exact_gp";
}

Vector GpModel::residual(const Dataset& data) const {
  if (data.replicate_count() != 1 || data.location_count() != gp_.size()) {
    throw DimensionMismatch("dataset does not match the Gaussian-process design");
  }
  Vector r = data.replicate(0);
  if (beta_) r -= *covariates_ * *beta_;
  return r;
}

double GpModel::log_objective(const Vector& theta, const Dataset& data) const {
  const Vector r = residual(data);
  if (objective_ == Objective::tapered) return gp_.loglik(theta, r);
  return full_gaussian_loglik(gp_.covariance_dense(theta), r);
}

Vector GpModel::score(const Vector& theta, const Dataset& data, Eigen::Index replicate) const {
  if (replicate != 0) throw DomainError("Gaussian-process dataset has a single replicate");
  const Vector r = residual(data);
  if (objective_ == Objective::tapered) return gp_.score(theta, r);
  const Matrix sigma = gp_.covariance_dense(theta);
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) throw DomainError("covariance is not positive definite");
  const Matrix s_inv = llt.solve(Matrix::Identity(sigma.rows(), sigma.cols()));
  const Vector alpha = s_inv * r;
  Vector s(theta.size());
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    const Matrix ds = gp_.covariance_derivative_dense(theta, k);
    s[k] = 0.5 * alpha.dot(ds * alpha) - 0.5 * s_inv.cwiseProduct(ds).sum();
  }
  return s;
}

Dataset GpModel::simulate(const Vector& theta, std::uint64_t seed) const {
  return simulate_gp(gp_.family(), theta, gp_.locations(), seed, gp_.times(), covariates_, beta_);
}

SpdMatrix GpModel::fisher(const Vector& theta) const {
  const Matrix sigma = gp_.covariance_dense(theta);
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) throw DomainError("covariance is not positive definite");
  const Eigen::Index p = theta.size();
  std::vector<Matrix> g;
  for (Eigen::Index k = 0; k < p; ++k) g.push_back(llt.solve(gp_.covariance_derivative_dense(theta, k)));
  Matrix f(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      f(i, j) = f(j, i) = 0.5 * g[i].cwiseProduct(g[j].transpose()).sum();
    }
  }
  return SpdMatrix(f);
}

SpdMatrix GpModel::analytic_p(const Vector& theta) const {
  return objective_ == Objective::tapered ? gp_.analytic_p(theta) : fisher(theta);
}

SpdMatrix GpModel::analytic_q(const Vector& theta) const {
  return objective_ == Objective::tapered ? gp_.analytic_q(theta) : fisher(theta);
}

}  // namespace ofs
