#pragma once

#include <Eigen/Dense>
#include <string>

#include "qmix/errors.hpp"

namespace qmix {

enum class Link { identity, logit };

inline std::string link_name(Link link) {
  return link == Link::identity ? "identity" : "logit";
}

inline Link parse_link(const std::string& name) {
  if (name == "identity") return Link::identity;
  if (name == "logit") return Link::logit;
  throw data_error("unknown link '" + name + "' (expected identity or logit)");
}

// Coefficients and their covariance from one GLM fit. residual_variance is
// only meaningful for the identity link; `iterations` only for IRLS fits.
struct FitResult {
  Eigen::VectorXd beta;
  Eigen::MatrixXd covariance;
  double residual_variance = 0.0;
  Link link = Link::identity;
  Eigen::Index n = 0;
  bool converged = false;
  int iterations = 0;
};

}  // namespace qmix
