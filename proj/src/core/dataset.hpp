#pragma once

#include <Eigen/Dense>

#include "core/errors.hpp"

namespace plsim {

// Observations for the partially linear single-index model
// y = eta(alpha'x) + beta'z + eps: response y (n), index covariates x (n x p,
// p >= 2), linear covariates z (n x q, q >= 1).
struct dataset {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  Eigen::MatrixXd z;

  Eigen::Index n() const { return y.size(); }
  Eigen::Index p() const { return x.cols(); }
  Eigen::Index q() const { return z.cols(); }

  void validate() const;
};

}  // namespace plsim
