#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "core/dataset.hpp"
#include "core/index.hpp"
#include "core/kernel.hpp"
#include "core/penalty.hpp"
#include "core/smoother.hpp"

namespace plsim {

// Knobs for the profiled LLA loop and the inner coordinate-descent solver.
struct optim_config {
  int max_outer_iters = 50;
  double outer_tol = 1e-6;
  int cd_max_sweeps = 2000;
  double cd_tol = 1e-8;
  double kkt_tol = 1e-8;
  std::vector<double> lambda_grid;  // empty: automatic log-spaced grid
  int lambda_grid_size = 30;
  double lambda_min_ratio = 0.05;
  double hbic_cn = 0.0;  // <= 0: log(log n)
  bool warm_start = true;
  int threads = 0;  // 0: default_threads(); used for grid sweeps without warm start
};

// Linearized least-squares problem around the current iterate. Column layout
// of z_star: alpha_free block (n_alpha columns) then beta block (n_beta).
struct linearized_problem {
  Eigen::VectorXd y_star;
  Eigen::MatrixXd z_star;
  Eigen::Index n_alpha = 0;
  Eigen::Index n_beta = 0;
};

linearized_problem linearize(const dataset& data, const theta& th, const kernel_spec& kern);

// min (2n)^-1 |y* - Z* c|^2 + sum_j w_j |c_j| over the alpha block (w_j >= 0),
// beta block unpenalized, solved by cyclic coordinate descent with covariance
// updates. Zeros are exact (soft thresholding).
struct cd_result {
  Eigen::VectorXd coef;
  int sweeps = 0;
  bool converged = true;
  double kkt = 0.0;
  std::vector<double> objective_trace;  // objective after each sweep
};

cd_result solve_weighted_lasso(const linearized_problem& prob, const Eigen::VectorXd& weights,
                               const optim_config& cfg, const Eigen::VectorXd& start);

double weighted_lasso_objective(const linearized_problem& prob, const Eigen::VectorXd& weights,
                                const Eigen::VectorXd& coef);
double weighted_lasso_kkt(const linearized_problem& prob, const Eigen::VectorXd& weights,
                          const Eigen::VectorXd& coef);

struct fit_result {
  theta est;
  active_set active;  // nonzero support of alpha_free
  double rss = 0.0;   // sum of squared profile residuals
  double lambda = 0.0;
  double h = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<double> objective_trace;  // penalized profile objective, accepted iterates
  std::vector<std::string> flags;
  Eigen::VectorXd gamma, eta, slope;  // final leave-one-out profile
};

// Penalized profile fit at the penalty's lambda. Empty init: LASSO-based
// initialization on the linear model.
fit_result fit_plsim(const dataset& data, const kernel_spec& kern, const penalty_spec& pen,
                     const optim_config& cfg, const std::optional<theta>& init = {});

// Constrained variant with beta frozen at zero (the link smooths raw y).
fit_result fit_constrained(const dataset& data, const kernel_spec& kern, const penalty_spec& pen,
                           const optim_config& cfg, const std::optional<theta>& init = {});

// Unpenalized profile fit with alpha_free restricted to a fixed support.
fit_result fit_restricted(const dataset& data, const kernel_spec& kern, const active_set& act,
                          const optim_config& cfg, bool include_beta = true);

// log(rss/n) + |active| * C_n * log(p) / n, C_n = log(log n) unless overridden.
// rss = 0 yields -inf.
double hbic(const dataset& data, const fit_result& fit, double cn_override = 0.0);

struct lambda_selection {
  double lambda = 0.0;
  int index = -1;
  fit_result fit;
  std::vector<double> grid;
  std::vector<double> hbic_trace;
  int failures = 0;
};

// HBIC model selection over a descending lambda grid, warm-started unless
// disabled; ties prefer the larger lambda. constrained=true runs the beta==0
// pipeline.
lambda_selection select_lambda(const dataset& data, const kernel_spec& kern, penalty_spec pen,
                               const optim_config& cfg, bool constrained = false);

// Initialization used by the fits: partially penalized linear LASSO of y on
// (x, z) with only the x block penalized (constrained=true drops z), HBIC over
// its own grid; the x coefficients seed alpha after sign fixing/normalization.
theta initial_theta(const dataset& data, const optim_config& cfg, bool constrained);

Eigen::VectorXd theta_stack(const theta& th);  // (alpha_free; beta)
theta theta_unstack(const Eigen::VectorXd& v, Eigen::Index p, Eigen::Index q);

}  // namespace plsim
