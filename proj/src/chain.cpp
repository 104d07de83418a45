#include "ofs/chain.hpp"

#include "ofs/errors.hpp"

namespace ofs {

std::string to_string(Adjustment a) {
  switch (a) {
    case Adjustment::raw:
      return "raw";
    case Adjustment::ofs:
      return "ofs";
    case Adjustment::curvature:
      return "curvature";
  }
  return "?";
}

Adjustment adjustment_from_string(const std::string& s) {
  if (s == "raw") return Adjustment::raw;
  if (s == "ofs") return Adjustment::ofs;
  if (s == "curvature") return Adjustment::curvature;
  throw ConfigError("unknown adjustment flag '" + s + "'");
}

void ChainConfig::validate(Eigen::Index dim) const {
  if (iterations < 1) throw ConfigError("chain iterations must be positive");
  if (burn_in < 0 || burn_in >= iterations) throw ConfigError("burn_in must lie in [0, iterations)");
  if (thin < 1) throw ConfigError("thin must be at least 1");
  if (initial.size() != dim) throw ConfigError("initial point has the wrong dimension");
  if (proposal_cov.rows() != dim || proposal_cov.cols() != dim) {
    throw ConfigError("proposal covariance must be " + std::to_string(dim) + " x " +
                      std::to_string(dim));
  }
  if (adapt.window < 1) throw ConfigError("adaptation window must be positive");
  if (adapt.target_acceptance < 0.0 || adapt.target_acceptance >= 1.0) {
    throw ConfigError("target acceptance must lie in (0, 1), or 0 for the default");
  }
}

}  // namespace ofs
