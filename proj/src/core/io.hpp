#pragma once

#include <string>
#include <vector>

#include "core/dataset.hpp"
#include "core/inference.hpp"
#include "core/simulation.hpp"

namespace plsim {

// Numeric CSV with a header row: comma separated, '.' decimal, LF endings.
struct csv_table {
  std::vector<std::string> names;
  Eigen::MatrixXd values;
};
csv_table read_csv(const std::string& path);

struct dataset_roles {
  std::string response;
  std::vector<std::string> linear;
  std::vector<std::string> index;  // empty: every remaining column
};

struct loaded_dataset {
  dataset data;
  std::string y_name;
  std::vector<std::string> x_names, z_names;
  bool standardized = false;
  // Centering/scaling actually applied (population standard deviations).
  double y_mean = 0.0, y_scale = 1.0;
  Eigen::VectorXd x_mean, x_scale, z_mean, z_scale;
};

// Loads the CSV, resolves column roles, and (by default) standardizes every
// column to mean zero / unit variance. Constant columns are rejected.
loaded_dataset load_and_standardize(const std::string& path, const dataset_roles& roles,
                                    bool standardize = true);
loaded_dataset standardize_dataset(const dataset& d, bool standardize = true);

// Ranks index covariates by |corr(y, x_j)| (ties broken by column order) and
// returns the `keep` best, in ascending column order.
std::vector<Eigen::Index> screen_features(const dataset& data, Eigen::Index keep,
                                          Eigen::VectorXd* scores = nullptr);

// Linear-vs-index split: a covariate is linear when |corr(y, x_j)| > corr_threshold
// and the straight-line fit stays inside the pointwise band
// m_hat(x) +- band_k * sigma_hat(x) on a grid over the central 95% of x_j.
struct partition_options {
  double corr_threshold = 0.3;
  double band_k = 0.3;
  double h = 0.0;  // <= 0: 1.06 sd(x_j) n^(-1/5) per variable
  int grid_points = 100;
  int threads = 0;
};

struct partition_result {
  std::vector<Eigen::Index> linear_vars, index_vars;
  Eigen::VectorXd score;          // |corr(y, x_j)|
  Eigen::VectorXd max_violation;  // band exceedance of the line; <= 0 means inside
  std::vector<std::string> flags;
};
partition_result partition_variables(const dataset& data, const partition_options& opt);

// Round-trip decimal formatting (shortest representation, locale independent).
std::string format_double(double v);

// Artifact writers.
void write_fit_json(const fit_result& fit, const dataset& data, const kernel_spec& kern,
                    const penalty_spec& pen, const loaded_dataset* meta, const std::string& path);
void write_curve_csv(const fit_result& fit, const dataset& data, const std::string& path);
void write_tests_json(const beta_test_result* bt, const eta_test_result* et,
                      const std::string& path);
void write_summary_csv(const summary_table& table, const std::string& path);
void write_summary_json(const summary_table& table, const std::string& path);
void write_partition_json(const partition_result& part, const std::vector<std::string>& names,
                          const std::string& path);

}  // namespace plsim
