#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "ofs/linalg.hpp"

namespace ofs {

enum class Support { real, positive, unit_interval };

std::string to_string(Support s);
Support support_from_string(const std::string& s);
bool in_support(Support s, double x);

/// Coordinate names and per-coordinate domains of a parameter vector.
struct ParamLayout {
  std::vector<std::string> names;
  std::vector<Support> supports;

  ParamLayout() = default;
  ParamLayout(std::vector<std::string> names, std::vector<Support> supports);

  Eigen::Index size() const { return static_cast<Eigen::Index>(names.size()); }
  bool contains(const Vector& theta) const;
  Eigen::Index index_of(const std::string& name) const;
  ParamLayout subset(const std::vector<Eigen::Index>& coords) const;

  bool operator==(const ParamLayout&) const = default;
};

/// Parameter vector with named coordinates. Construction rejects values
/// outside their declared support.
class ParamVec {
 public:
  ParamVec(ParamLayout layout, Vector values);

  const ParamLayout& layout() const { return layout_; }
  const Vector& values() const { return values_; }
  Eigen::Index size() const { return values_.size(); }
  double operator[](Eigen::Index i) const { return values_[i]; }
  double at(const std::string& name) const { return values_[layout_.index_of(name)]; }

 private:
  ParamLayout layout_;
  Vector values_;
};

/// Observations are replicates x locations. A single realization of a
/// stochastic process has one row.
struct Dataset {
  Matrix observations;
  Matrix locations;   // locations x 2, optional
  Vector times;       // per location, optional
  Matrix covariates;  // locations x q, optional

  Eigen::Index replicate_count() const { return observations.rows(); }
  Eigen::Index location_count() const { return observations.cols(); }
  Vector replicate(Eigen::Index r) const { return observations.row(r).transpose(); }

  // Throws DimensionMismatch when fields disagree on the location count.
  void validate() const;
};

// Priors -------------------------------------------------------------------

struct HalfCauchyPrior {
  double scale = 1.0;
};
struct UniformPrior {
  double lo = 0.0;
  double hi = 1.0;
};
struct NormalPrior {
  double mean = 0.0;
  double sd = 1.0;
};
// Improper; for tests only.
struct FlatPrior {};

using CoordinatePrior = std::variant<HalfCauchyPrior, UniformPrior, NormalPrior, FlatPrior>;

struct PriorSpec {
  std::vector<CoordinatePrior> coordinates;

  Eigen::Index size() const { return static_cast<Eigen::Index>(coordinates.size()); }
  static PriorSpec flat(Eigen::Index p);
};

double log_prior_density(const CoordinatePrior& prior, double x);

/// Sum of coordinate log densities; -inf outside the prior support.
double log_prior(const PriorSpec& prior, const Vector& theta);
double log_prior(const PriorSpec& prior, const ParamVec& theta);

/// Checks that each coordinate prior is proper (unless flat) and lives on the
/// coordinate's declared support.
void validate_prior(const PriorSpec& prior, const ParamLayout& layout);

// Objective models -----------------------------------------------------------

struct Capabilities {
  bool per_replicate_score = false;
  bool analytic_p = false;
  bool analytic_q = false;
  bool simulate = false;
};

/// A pluggable log-objective l_M(theta; y) with optional extras. Implementations
/// are immutable and safe to share across threads; any randomness comes from
/// an explicit seed.
class ObjectiveModel {
 public:
  virtual ~ObjectiveModel() = default;

  virtual std::string name() const = 0;
  virtual const ParamLayout& layout() const = 0;
  virtual Capabilities capabilities() const = 0;

  virtual double log_objective(const Vector& theta, const Dataset& data) const = 0;

  /// Gradient of the objective restricted to replicate r.
  virtual Vector score(const Vector& theta, const Dataset& data, Eigen::Index replicate) const;
  virtual Dataset simulate(const Vector& theta, std::uint64_t seed) const;
  virtual SpdMatrix analytic_p(const Vector& theta) const;
  virtual SpdMatrix analytic_q(const Vector& theta) const;

  /// Full-data gradient: summed replicate scores when available, otherwise
  /// central finite differences of log_objective.
  Vector gradient(const Vector& theta, const Dataset& data) const;
};

/// log_objective + log_prior, unnormalized. -inf outside the support; a
/// non-finite objective at an in-support point is a model bug and throws.
double log_quasi_posterior(const ObjectiveModel& model, const PriorSpec& prior,
                           const Vector& theta, const Dataset& data);

}  // namespace ofs
