#include "core/penalty.hpp"

#include <cmath>

namespace plsim {

void penalty_spec::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    fail_invalid(error_code::invalid_option, "penalty lambda must be >= 0 and finite");
  if (family == penalty_family::scad && !(a > 2.0))
    fail_invalid(error_code::invalid_option, "SCAD requires a > 2");
}

double penalty_spec::value(double t) const {
  validate();
  if (t < 0.0) fail_invalid(error_code::negative_input, "penalty argument must be >= 0");
  if (lambda == 0.0) return 0.0;
  if (family == penalty_family::l1) return lambda * t;
  if (t <= lambda) return lambda * t;
  if (t <= a * lambda) return -(t * t - 2.0 * a * lambda * t + lambda * lambda) / (2.0 * (a - 1.0));
  return (a + 1.0) * lambda * lambda / 2.0;
}

double penalty_spec::deriv(double t) const {
  validate();
  if (t < 0.0) fail_invalid(error_code::negative_input, "penalty argument must be >= 0");
  if (lambda == 0.0) return 0.0;
  if (family == penalty_family::l1) return lambda;
  if (t <= lambda) return lambda;
  double num = a * lambda - t;
  return num > 0.0 ? num / (a - 1.0) : 0.0;
}

Eigen::VectorXd lla_weights(const penalty_spec& pen, const Eigen::VectorXd& current) {
  Eigen::VectorXd w(current.size());
  for (Eigen::Index j = 0; j < current.size(); ++j) w(j) = pen.deriv(std::abs(current(j)));
  return w;
}

}  // namespace plsim
