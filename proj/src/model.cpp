#include "ofs/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "ofs/errors.hpp"

namespace ofs {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
}  // namespace

std::string to_string(Support s) {
  switch (s) {
    case Support::real:
      return "real";
    case Support::positive:
      return "positive";
    case Support::unit_interval:
      return "unit_interval";
  }
  return "?";
}

Support support_from_string(const std::string& s) {
  if (s == "real") return Support::real;
  if (s == "positive") return Support::positive;
  if (s == "unit_interval") return Support::unit_interval;
  throw DomainError("unknown support '" + s + "'");
}

bool in_support(Support s, double x) {
  switch (s) {
    case Support::real:
      return std::isfinite(x);
    case Support::positive:
      return std::isfinite(x) && x > 0.0;
    case Support::unit_interval:
      return x >= 0.0 && x <= 1.0;
  }
  return false;
}

ParamLayout::ParamLayout(std::vector<std::string> n, std::vector<Support> s)
    : names(std::move(n)), supports(std::move(s)) {
  if (names.size() != supports.size()) {
    throw DimensionMismatch("parameter names and supports differ in length");
  }
}

bool ParamLayout::contains(const Vector& theta) const {
  if (theta.size() != size()) return false;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (!in_support(supports[static_cast<std::size_t>(i)], theta[i])) return false;
  }
  return true;
}

Eigen::Index ParamLayout::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<Eigen::Index>(i);
  }
  throw DomainError("unknown parameter '" + name + "'");
}

ParamLayout ParamLayout::subset(const std::vector<Eigen::Index>& coords) const {
  ParamLayout out;
  for (Eigen::Index c : coords) {
    out.names.push_back(names.at(static_cast<std::size_t>(c)));
    out.supports.push_back(supports.at(static_cast<std::size_t>(c)));
  }
  return out;
}

ParamVec::ParamVec(ParamLayout layout, Vector values)
    : layout_(std::move(layout)), values_(std::move(values)) {
  if (values_.size() != layout_.size()) {
    throw DimensionMismatch("parameter vector has " + std::to_string(values_.size()) +
                            " values for " + std::to_string(layout_.size()) + " names");
  }
  for (Eigen::Index i = 0; i < values_.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (!in_support(layout_.supports[k], values_[i])) {
      throw DomainError("parameter '" + layout_.names[k] + "' = " + std::to_string(values_[i]) +
                        " outside its " + to_string(layout_.supports[k]) + " support");
    }
  }
}

void Dataset::validate() const {
  const Eigen::Index n = location_count();
  if (replicate_count() < 1) throw DimensionMismatch("dataset has no replicates");
  if (locations.size() > 0 && locations.rows() != n) {
    throw DimensionMismatch("locations table has " + std::to_string(locations.rows()) +
                            " rows for " + std::to_string(n) + " observation columns");
  }
  if (times.size() > 0 && times.size() != n) {
    throw DimensionMismatch("times vector length does not match observation columns");
  }
  if (covariates.size() > 0 && covariates.rows() != n) {
    throw DimensionMismatch("covariate matrix rows do not match observation columns");
  }
}

PriorSpec PriorSpec::flat(Eigen::Index p) {
  PriorSpec spec;
  spec.coordinates.assign(static_cast<std::size_t>(p), FlatPrior{});
  return spec;
}

double log_prior_density(const CoordinatePrior& prior, double x) {
  return std::visit(
      overloaded{
          [x](const HalfCauchyPrior& hc) {
            if (!(x >= 0.0) || !std::isfinite(x)) return kNegInf;
            const double z = x / hc.scale;
            return std::log(2.0 / (std::numbers::pi * hc.scale)) - std::log1p(z * z);
          },
          [x](const UniformPrior& u) {
            if (!(x >= u.lo && x <= u.hi)) return kNegInf;
            return -std::log(u.hi - u.lo);
          },
          [x](const NormalPrior& n) {
            if (!std::isfinite(x)) return kNegInf;
            const double z = (x - n.mean) / n.sd;
            return -0.5 * z * z - std::log(n.sd) - 0.5 * std::log(2.0 * std::numbers::pi);
          },
          [x](const FlatPrior&) { return std::isfinite(x) ? 0.0 : kNegInf; },
      },
      prior);
}

double log_prior(const PriorSpec& prior, const Vector& theta) {
  if (prior.size() != theta.size()) {
    throw DimensionMismatch("prior has " + std::to_string(prior.size()) +
                            " coordinates, parameter has " + std::to_string(theta.size()));
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    total += log_prior_density(prior.coordinates[static_cast<std::size_t>(i)], theta[i]);
    if (total == kNegInf) return kNegInf;
  }
  return total;
}

double log_prior(const PriorSpec& prior, const ParamVec& theta) {
  return log_prior(prior, theta.values());
}

void validate_prior(const PriorSpec& prior, const ParamLayout& layout) {
  if (prior.size() != layout.size()) {
    throw DimensionMismatch("prior has " + std::to_string(prior.size()) +
                            " coordinates for " + std::to_string(layout.size()) + " parameters");
  }
  for (std::size_t i = 0; i < prior.coordinates.size(); ++i) {
    const Support s = layout.supports[i];
    const std::string& name = layout.names[i];
    std::visit(
        overloaded{
            [&](const HalfCauchyPrior& hc) {
              if (!(hc.scale > 0.0)) throw DomainError("half-Cauchy scale must be positive");
              if (s != Support::positive) {
                throw DomainError("half-Cauchy prior on '" + name + "' needs positive support");
              }
            },
            [&](const UniformPrior& u) {
              if (!(u.hi > u.lo)) throw DomainError("uniform prior needs lo < hi");
              if (s == Support::positive && u.lo < 0.0) {
                throw DomainError("uniform prior on '" + name + "' extends below 0");
              }
              if (s == Support::unit_interval && (u.lo < 0.0 || u.hi > 1.0)) {
                throw DomainError("uniform prior on '" + name + "' leaves [0, 1]");
              }
            },
            [&](const NormalPrior& n) {
              if (!(n.sd > 0.0)) throw DomainError("normal prior sd must be positive");
              if (s != Support::real) {
                throw DomainError("normal prior on '" + name + "' needs real support");
              }
            },
            [](const FlatPrior&) {},
        },
        prior.coordinates[i]);
  }
}

Vector ObjectiveModel::score(const Vector&, const Dataset&, Eigen::Index) const {
  throw UnsupportedCapability(name() + ": per-replicate score not provided");
}

Dataset ObjectiveModel::simulate(const Vector&, std::uint64_t) const {
  throw UnsupportedCapability(name() + ": simulator not provided");
}

SpdMatrix ObjectiveModel::analytic_p(const Vector&) const {
  throw UnsupportedCapability(name() + ": analytic P not provided");
}

SpdMatrix ObjectiveModel::analytic_q(const Vector&) const {
  throw UnsupportedCapability(name() + ": analytic Q not provided");
}

Vector ObjectiveModel::gradient(const Vector& theta, const Dataset& data) const {
  if (capabilities().per_replicate_score) {
    Vector g = Vector::Zero(theta.size());
    for (Eigen::Index r = 0; r < data.replicate_count(); ++r) g += score(theta, data, r);
    return g;
  }
  return numerical_gradient([&](const Vector& t) { return log_objective(t, data); }, theta);
}

double log_quasi_posterior(const ObjectiveModel& model, const PriorSpec& prior,
                           const Vector& theta, const Dataset& data) {
  if (!model.layout().contains(theta)) return kNegInf;
  const double lp = log_prior(prior, theta);
  if (lp == kNegInf) return kNegInf;
  const double lo = model.log_objective(theta, data);
  if (!std::isfinite(lo)) {
    throw DomainError(model.name() + ": non-finite log-objective at an in-support parameter");
  }
  return lo + lp;
}

}  // namespace ofs
