#pragma once

#include "ofs/linalg.hpp"
#include "ofs/model.hpp"

namespace ofs {

struct OptimizeOptions {
  int max_iterations = 2000;
  int restarts = 3;
  double size_tolerance = 1e-8;
  double initial_step = 0.1;  // in unconstrained coordinates
};

struct OptimizeResult {
  Vector argmax;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Maximizes f over the support described by `layout` with restarted
/// Nelder-Mead. Positive coordinates are searched on the log scale and
/// unit-interval coordinates on the logit scale. f may return -inf.
OptimizeResult maximize(const ScalarFunction& f, const Vector& start, const ParamLayout& layout,
                        const OptimizeOptions& options = {});

/// Maps between a parameter and its unconstrained coordinates.
Vector to_unconstrained(const Vector& theta, const ParamLayout& layout);
Vector from_unconstrained(const Vector& z, const ParamLayout& layout);

}  // namespace ofs
