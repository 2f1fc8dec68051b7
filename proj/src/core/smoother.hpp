#pragma once

#include <vector>

#include <Eigen/Dense>

#include "core/dataset.hpp"
#include "core/index.hpp"
#include "core/kernel.hpp"

namespace plsim {

// Value and slope of the weighted least-squares line at a single point.
struct local_fit {
  double value = 0.0;
  double slope = 0.0;
};

// Local linear fit of `responses` on `index_values` at t. Throws
// singular_local_fit when the kernel-weighted variance of the index values at t
// falls below 1e-14.
local_fit local_linear_at(double t, const Eigen::VectorXd& index_values,
                          const Eigen::VectorXd& responses, const kernel_spec& kern);

// Normalized local-linear response weights at t; they sum to one.
Eigen::VectorXd local_linear_weights(double t, const Eigen::VectorXd& index_values,
                                     const kernel_spec& kern);

// Leave-one-out profile of the link at the sample points: eta(i), slope(i) come
// from the local linear fit of y_j - beta'z_j on alpha'x_j over j != i at
// t = alpha'x_i.
struct profile_fit {
  Eigen::VectorXd gamma;    // alpha'x_i
  Eigen::VectorXd resid_y;  // y - z beta
  Eigen::VectorXd eta;      // leave-one-out link values
  Eigen::VectorXd slope;    // leave-one-out link derivatives

  double rss() const { return (resid_y - eta).squaredNorm(); }
};

profile_fit profile_eta(const dataset& data, const theta& th, const kernel_spec& kern);

// Full-sample prediction of the link at a new index position.
double predict_eta(const profile_fit& pf, double t, const kernel_spec& kern);

// Analytic derivative of the leave-one-out profile values. Row i holds
// d eta_i / d beta (q columns, exactly -sum_j W_ij z_j) followed by
// d eta_i / d alpha_free restricted to `act`; pass all coordinates for the
// unrestricted gradient. Coordinates outside `act` must be zero.
Eigen::MatrixXd profile_eta_gradient(const dataset& data, const theta& th,
                                     const active_set& act, const kernel_spec& kern);

active_set all_free_coordinates(Eigen::Index p);

// K-fold cross-validation of the residualized smoother over a bandwidth grid.
// Observation i belongs to fold i % folds; ties prefer the larger bandwidth.
double select_bandwidth_cv(const dataset& data, const theta& th,
                           const std::vector<double>& grid, int folds,
                           kernel_family family = kernel_family::gaussian);

}  // namespace plsim
