#pragma once

#include <vector>

#include <Eigen/Dense>

#include "core/errors.hpp"

namespace plsim {

// Sorted, unique, 0-based positions into the free part of the index vector.
using active_set = std::vector<Eigen::Index>;

// Free part alpha_free = (alpha_2, ..., alpha_p) of a unit index vector with
// alpha_1 > 0; alpha_1 = sqrt(1 - |alpha_free|^2) is implied, so |alpha_free|
// must stay strictly below 1.
struct index_param {
  Eigen::VectorXd alpha_free;

  Eigen::Index p() const { return alpha_free.size() + 1; }
  void validate() const;
  double alpha1() const;
  Eigen::VectorXd full_alpha() const;
};

// d(full alpha)/d(alpha_free): p x (p-1), first row -alpha_free'/alpha_1,
// identity below.
Eigen::MatrixXd jacobian(const index_param& ip);

// Jacobian restricted to an active subset of free coordinates; coordinates
// outside `act` must be exactly zero.
Eigen::MatrixXd jacobian_restricted(const index_param& ip, const active_set& act);

// J(alpha_free)' v without forming J: v[1:] - alpha_free * v[0] / alpha_1.
Eigen::VectorXd jacobian_t_apply(const index_param& ip, const Eigen::VectorXd& v);

// Full model parameter.
struct theta {
  index_param index;
  Eigen::VectorXd beta;
};

active_set nonzero_support(const Eigen::VectorXd& v);
void check_active(const active_set& act, Eigen::Index size);

}  // namespace plsim
