#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "core/dataset.hpp"
#include "core/inference.hpp"

namespace plsim {

// Synthetic designs used in the Monte Carlo study. Signal means the beta scale
// c1 for the 1a/1b families and the link-bump size c2 for model 2.
//   m1a:     y = exp(a'x) + c1 (z1 + z2) + e,            AR(0.25) covariates
//   m1b_*:   y = sin(pi/2 a'x) + c1 (z1 + z2) + 0.5 e,   AR(0.25 / 0.75 / joint 0.75)
//   m2:      y = a'x + c2 s(a'x) + 0.5 z1 - 0.3 z2 + 0.75 e, s a fixed sine bump
enum class sim_model { m1a, m1b_i, m1b_ii, m1b_iii, m2 };
enum class sim_pipeline { fit, test_beta, test_eta };

struct sim_scenario {
  sim_model model = sim_model::m1a;
  Eigen::Index n = 200;
  Eigen::Index p = 100;
  double h = 0.0;  // <= 0: model default bandwidth
  double b = 0.0;  // <= 0: automatic U-statistic bandwidth
  std::uint64_t seed = 20240501ULL;
};

struct sim_truth {
  Eigen::VectorXd alpha;  // full index vector
  Eigen::VectorXd beta;
  active_set active;                        // free-coordinate support of alpha
  std::vector<Eigen::Index> alpha_report;   // full-alpha coordinates tracked in tables
};

// Stationary AR(1) rows: V_1 = xi_1, V_k = rho V_{k-1} + sqrt(1-rho^2) xi_k,
// so cov(V_i, V_j) = rho^|i-j| exactly. Rows are filled in order.
Eigen::MatrixXd gen_ar_normal(Eigen::Index n, Eigen::Index dim, double rho,
                              std::mt19937_64& rng);

// Draw order per replication: index covariates (joint matrix for m1b_iii),
// then linear covariates, then noise.
dataset gen_dataset(const sim_scenario& scn, double signal, std::uint64_t rep_seed,
                    sim_truth* truth = nullptr);

double default_bandwidth(sim_model model);
std::string to_string(sim_model model);
std::string to_string(sim_pipeline pipe);

// One aggregate row (scenario x signal level x pipeline).
struct summary_row {
  std::string model;
  std::string pipeline;
  Eigen::Index n = 0;
  Eigen::Index p = 0;
  double signal = 0.0;
  int reps = 0;
  int failures = 0;
  int descent_violations = 0;
  std::optional<double> tpr, fpr;  // percent
  std::vector<std::optional<double>> bias_beta, mse_beta, bias_alpha, mse_alpha;
  std::optional<double> reject_rate, reject_se, mean_stat;
};

struct summary_table {
  std::vector<summary_row> rows;
  std::uint64_t seed = 0;
  double level = 0.05;
  double h = 0.0;
};

struct sim_options {
  sim_pipeline pipeline = sim_pipeline::fit;
  bool oracle = false;
  int reps = 200;
  double level = 0.05;
  int threads = 0;
  optim_config optim;
  penalty_spec penalty;  // lambda <= 0: HBIC selection over the automatic grid
  link_family null_link = link_family::linear;
};

// Per-replication seeds come from a fixed hash of (seed, signal index, rep);
// replications run in parallel but are aggregated in index order, so results
// do not depend on the thread count.
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t signal_idx, std::uint64_t rep);

summary_table run_replications(const sim_scenario& scn, const std::vector<double>& signals,
                               const sim_options& opt);

}  // namespace plsim
