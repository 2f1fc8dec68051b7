#pragma once

#include <Eigen/Dense>

#include "core/errors.hpp"

namespace plsim {

enum class penalty_family { scad, l1 };

// Folded-concave penalty p_lambda(t) on t >= 0. SCAD uses the three-piece form
// with knots at lambda and a*lambda (a > 2, default 3.7); the derivative is
// taken left-continuous at the knots. lambda = 0 disables the penalty.
struct penalty_spec {
  penalty_family family = penalty_family::scad;
  double lambda = 0.0;
  double a = 3.7;

  void validate() const;
  double value(double t) const;
  double deriv(double t) const;
};

// One LLA weight per free index coordinate: p'_lambda(|current_j|).
Eigen::VectorXd lla_weights(const penalty_spec& pen, const Eigen::VectorXd& current);

}  // namespace plsim
