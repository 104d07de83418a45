#include "ofs/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

#include "ofs/errors.hpp"

namespace ofs {

namespace {

struct Problem {
  const ScalarFunction* f;
  const ParamLayout* layout;
};

double negated(const gsl_vector* x, void* params) {
  const auto* problem = static_cast<const Problem*>(params);
  Vector z(static_cast<Eigen::Index>(x->size));
  for (std::size_t i = 0; i < x->size; ++i) z[static_cast<Eigen::Index>(i)] = gsl_vector_get(x, i);
  const Vector theta = from_unconstrained(z, *problem->layout);
  if (!problem->layout->contains(theta)) return std::numeric_limits<double>::max();
  const double v = (*problem->f)(theta);
  if (!std::isfinite(v)) return std::numeric_limits<double>::max();
  return -v;
}

}  // namespace

Vector to_unconstrained(const Vector& theta, const ParamLayout& layout) {
  Vector z(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    switch (layout.supports[static_cast<std::size_t>(i)]) {
      case Support::real:
        z[i] = theta[i];
        break;
      case Support::positive:
        z[i] = std::log(theta[i]);
        break;
      case Support::unit_interval: {
        const double t = std::clamp(theta[i], 1e-12, 1.0 - 1e-12);
        z[i] = std::log(t / (1.0 - t));
        break;
      }
    }
  }
  return z;
}

Vector from_unconstrained(const Vector& z, const ParamLayout& layout) {
  Vector theta(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    switch (layout.supports[static_cast<std::size_t>(i)]) {
      case Support::real:
        theta[i] = z[i];
        break;
      case Support::positive:
        theta[i] = std::exp(z[i]);
        break;
      case Support::unit_interval:
        theta[i] = 1.0 / (1.0 + std::exp(-z[i]));
        break;
    }
  }
  return theta;
}

OptimizeResult maximize(const ScalarFunction& f, const Vector& start, const ParamLayout& layout,
                        const OptimizeOptions& options) {
  if (start.size() != layout.size()) throw DimensionMismatch("start point does not match layout");
  if (!layout.contains(start)) throw DomainError("optimizer start point is outside the support");
  const std::size_t n = static_cast<std::size_t>(start.size());
  Problem problem{&f, &layout};
  gsl_multimin_function fn{&negated, n, &problem};

  gsl_set_error_handler_off();
  gsl_vector* x = gsl_vector_alloc(n);
  gsl_vector* step = gsl_vector_alloc(n);
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);

  Vector z = to_unconstrained(start, layout);
  OptimizeResult result;
  double previous = std::numeric_limits<double>::max();
  for (int round = 0; round <= options.restarts; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      gsl_vector_set(x, i, z[static_cast<Eigen::Index>(i)]);
      gsl_vector_set(step, i, options.initial_step);
    }
    gsl_multimin_fminimizer_set(s, &fn, x, step);
    int status = GSL_CONTINUE;
    int iter = 0;
    while (status == GSL_CONTINUE && iter < options.max_iterations) {
      ++iter;
      if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
      status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), options.size_tolerance);
    }
    result.iterations += iter;
    for (std::size_t i = 0; i < n; ++i) z[static_cast<Eigen::Index>(i)] = gsl_vector_get(s->x, i);
    const double value = s->fval;
    const bool settled = status == GSL_SUCCESS && std::abs(previous - value) <= 1e-9 * (1.0 + std::abs(value));
    previous = value;
    result.converged = status == GSL_SUCCESS;
    if (settled) break;
  }
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(step);
  gsl_vector_free(x);

  result.argmax = from_unconstrained(z, layout);
  result.value = -previous;
  if (previous == std::numeric_limits<double>::max()) {
    throw DomainError("optimizer found no point with a finite objective");
  }
  return result;
}

}  // namespace ofs
