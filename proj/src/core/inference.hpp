#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "core/distributions.hpp"
#include "core/optimizer.hpp"

namespace plsim {

struct beta_test_result {
  double rss0 = 0.0;
  double rss1 = 0.0;
  double t_n = 0.0;
  double p_value = 1.0;
  int df = 0;
  fit_result fit_alt;
  fit_result fit_null;
  std::vector<std::string> flags;
};

// Quasi-likelihood-ratio test of H0: beta == 0.
// T_n = (RSS0 - RSS1) / (RSS1 / (n - q)) compared against chi-square with q
// dof; RSS0 comes from the constrained fit (link smooths raw y) and RSS1 from
// the full fit. With a nonpositive numerator the statistic is reported as
// computed, flagged, and the p-value set to 1. oracle=true restricts both fits
// to `truth` and drops the penalty.
beta_test_result test_beta(const dataset& data, const kernel_spec& kern, const penalty_spec& pen,
                           const optim_config& cfg, bool oracle = false,
                           const active_set* truth = nullptr);

// Plug-in estimate of Sigma* = E[L L'] whose rows combine the centered linear
// covariates and the slope-weighted centered active index covariates, plus
// Phi = top-left q x q block of Sigma*^{-1} (the covariance inverse entering
// the local power).
struct sigma_star_result {
  Eigen::MatrixXd sigma_star;  // (q+s) x (q+s)
  Eigen::MatrixXd phi;         // q x q
  double cond = 0.0;
};
sigma_star_result estimate_sigma_star(const dataset& data, const fit_result& fit,
                                      const kernel_spec& kern);

// Power of the level-`level` chi-square test against the local alternative
// beta = delta: noncentral upper tail at the central critical value with
// ncp = n * delta' Phi^{-1} delta / sigma2. delta = 0 returns `level` exactly.
double theoretical_power(const Eigen::MatrixXd& phi, const Eigen::VectorXd& delta,
                         Eigen::Index n, double sigma2, double level);

// Parametric null family for the link, fitted by least squares on the partial
// residuals: constant g = zeta, linear g = zeta * t, or a user-supplied g with
// derivative dg (Gauss-Newton from zeta_init, step-halving, tol 1e-8).
enum class link_family { constant, linear, custom };
struct null_link_spec {
  link_family family = link_family::linear;
  std::function<double(double, const Eigen::VectorXd&)> g;
  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> dg;
  Eigen::Index dim = 1;
  Eigen::VectorXd zeta_init;

  double eval(double t, const Eigen::VectorXd& zeta) const;
};

Eigen::VectorXd fit_null_link(const Eigen::VectorXd& t, const Eigen::VectorXd& u,
                              const null_link_spec& link);

struct eta_test_result {
  double s_n = 0.0;
  double sigma_s2 = 0.0;
  double v_n = 0.0;
  double v_n_sq = 0.0;
  double p_value = 1.0;
  double b = 0.0;
  Eigen::VectorXd zeta;
  std::vector<std::string> flags;
};

// Kernel-weighted degenerate U-statistic test of H0: the link lies in the
// parametric family. V_n^2 is compared against chi-square with 1 dof.
// b <= 0 selects the default bandwidth sd(alpha'x) * n^(-2/5).
eta_test_result test_eta(const dataset& data, const fit_result& fit, const null_link_spec& link,
                         kernel_family g_family = kernel_family::gaussian, double b = 0.0);

// U-statistic internals (exposed for calibration tests):
// s_n      = sum_{i != j} e_i e_j G_b(g_i - g_j) / (n(n-1))
// sigma_s2 = 2 sum_{i != j} G((g_i - g_j)/b)^2 / b * e_i^2 e_j^2 / (n(n-1))
double u_stat_s_n(const Eigen::VectorXd& eps, const Eigen::VectorXd& gamma, double b,
                  kernel_family fam, int threads = 0);
double u_stat_sigma2(const Eigen::VectorXd& eps, const Eigen::VectorXd& gamma, double b,
                     kernel_family fam, int threads = 0);

}  // namespace plsim
