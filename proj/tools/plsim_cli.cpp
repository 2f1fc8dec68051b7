// Command-line front end for the plsim shared library. Built strictly on the
// C interface in plsim/plsim.h; exit codes: 0 success, 2 invalid input or
// unreadable/unwritable files, 3 numerical failure.
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "plsim/plsim.h"

namespace {

int exit_code(plsim_status st) {
  switch (st) {
    case PLSIM_OK: return 0;
    case PLSIM_ERR_INVALID: return 2;
    case PLSIM_ERR_IO: return 2;
    default: return 3;
  }
}

// Returns 0 on success; otherwise prints the library error and maps the code.
int check(plsim_status st, const std::string& what) {
  if (st == PLSIM_OK) return 0;
  std::fprintf(stderr, "plsim: %s: %s\n", what.c_str(), plsim_last_error());
  return exit_code(st);
}

using dataset_ptr = std::unique_ptr<plsim_dataset, decltype(&plsim_dataset_free)>;
using fit_ptr = std::unique_ptr<plsim_fit, decltype(&plsim_fit_free)>;
using beta_test_ptr = std::unique_ptr<plsim_beta_test, decltype(&plsim_beta_test_free)>;
using eta_test_ptr = std::unique_ptr<plsim_eta_test, decltype(&plsim_eta_test_free)>;
using partition_ptr = std::unique_ptr<plsim_partition, decltype(&plsim_partition_free)>;
using summary_ptr = std::unique_ptr<plsim_summary, decltype(&plsim_summary_free)>;

struct data_args {
  std::string input;
  std::string response;
  std::string linear;  // comma-separated z column names
  bool no_standardize = false;
};

struct fit_args {
  std::string kernel = "gaussian";
  double bandwidth = 0.0;
  int cv_folds = 10;
  std::string penalty = "scad";
  double lambda = 0.0;
  double scad_a = 3.7;
  int grid_size = 30;
  double min_ratio = 0.05;
  int max_outer = 50;
  double outer_tol = 1e-6;
  int cd_sweeps = 2000;
  double cd_tol = 1e-10;
  bool no_warm_start = false;
  int threads = 0;
};

void add_data_flags(CLI::App* cmd, data_args& d, bool linear_required) {
  cmd->add_option("--input", d.input, "input CSV (header row, numeric)")->required();
  cmd->add_option("--response", d.response, "response column name")->required();
  auto* lin = cmd->add_option("--linear", d.linear,
                              "comma-separated linear-part column names; "
                              "remaining columns form the index part");
  if (linear_required) lin->required();
  cmd->add_flag("--no-standardize", d.no_standardize,
                "keep columns on their original scale");
}

void add_fit_flags(CLI::App* cmd, fit_args& f) {
  cmd->add_option("--kernel", f.kernel, "smoothing kernel")
      ->check(CLI::IsMember({"gaussian", "epanechnikov"}));
  cmd->add_option("--bandwidth", f.bandwidth,
                  "smoother bandwidth; <= 0 selects by cross-validation");
  cmd->add_option("--cv-folds", f.cv_folds, "folds for bandwidth selection");
  cmd->add_option("--penalty", f.penalty, "penalty family")
      ->check(CLI::IsMember({"scad", "l1"}));
  cmd->add_option("--lambda", f.lambda, "penalty level; <= 0 selects by HBIC");
  cmd->add_option("--scad-a", f.scad_a, "SCAD shape parameter");
  cmd->add_option("--grid-size", f.grid_size, "automatic lambda grid length");
  cmd->add_option("--min-ratio", f.min_ratio, "lambda grid floor / lambda max");
  cmd->add_option("--max-outer", f.max_outer, "outer iteration cap");
  cmd->add_option("--outer-tol", f.outer_tol, "outer convergence tolerance");
  cmd->add_option("--cd-sweeps", f.cd_sweeps, "coordinate-descent sweep cap");
  cmd->add_option("--cd-tol", f.cd_tol, "coordinate-descent tolerance");
  cmd->add_flag("--no-warm-start", f.no_warm_start,
                "solve each lambda from the initializer instead of the previous fit");
  cmd->add_option("--threads", f.threads,
                  "worker threads; 0 honors PLSIM_THREADS, then hardware");
}

plsim_fit_options make_options(const fit_args& f) {
  plsim_fit_options o;
  plsim_fit_options_init(&o);
  o.kernel = f.kernel == "epanechnikov" ? PLSIM_KERNEL_EPANECHNIKOV : PLSIM_KERNEL_GAUSSIAN;
  o.h = f.bandwidth;
  o.cv_folds = f.cv_folds;
  o.penalty = f.penalty == "l1" ? PLSIM_PENALTY_L1 : PLSIM_PENALTY_SCAD;
  o.lambda = f.lambda;
  o.scad_a = f.scad_a;
  o.lambda_grid_size = f.grid_size;
  o.lambda_min_ratio = f.min_ratio;
  o.max_outer_iters = f.max_outer;
  o.outer_tol = f.outer_tol;
  o.cd_max_sweeps = f.cd_sweeps;
  o.cd_tol = f.cd_tol;
  o.warm_start = f.no_warm_start ? 0 : 1;
  o.threads = f.threads;
  return o;
}

int load_data(const data_args& d, dataset_ptr& out) {
  plsim_dataset* raw = nullptr;
  plsim_status st = plsim_dataset_load_csv(d.input.c_str(), d.response.c_str(),
                                           d.linear.empty() ? nullptr : d.linear.c_str(),
                                           d.no_standardize ? 0 : 1, &raw);
  int rc = check(st, "loading '" + d.input + "'");
  if (rc != 0) return rc;
  out.reset(raw);
  return 0;
}

std::string joined(const std::string& dir, const std::string& file) {
  if (dir.empty() || dir == ".") return file;
  return dir.back() == '/' ? dir + file : dir + "/" + file;
}

int cmd_fit(const data_args& d, const fit_args& f, const std::string& outdir) {
  dataset_ptr data(nullptr, plsim_dataset_free);
  if (int rc = load_data(d, data); rc != 0) return rc;

  plsim_fit_options opt = make_options(f);
  plsim_fit* raw = nullptr;
  if (int rc = check(plsim_fit_run(data.get(), &opt, &raw), "fit"); rc != 0) return rc;
  fit_ptr fit(raw, plsim_fit_free);

  double rss = 0, lambda = 0, h = 0;
  int converged = 0, iters = 0;
  plsim_fit_stats(fit.get(), &rss, &lambda, &h, &converged, &iters);
  int64_t active = 0;
  plsim_fit_active_set(fit.get(), nullptr, 0, &active);
  std::printf("fit: rss=%.6g lambda=%.6g h=%.6g active=%lld converged=%d iters=%d\n", rss,
              lambda, h, static_cast<long long>(active), converged, iters);

  std::string fit_path = joined(outdir, "fit.json");
  std::string curve_path = joined(outdir, "curve.csv");
  if (int rc = check(plsim_fit_write_json(fit.get(), fit_path.c_str()), "writing fit.json");
      rc != 0)
    return rc;
  if (int rc = check(plsim_fit_write_curve_csv(fit.get(), curve_path.c_str()),
                     "writing curve.csv");
      rc != 0)
    return rc;
  std::printf("wrote %s and %s\n", fit_path.c_str(), curve_path.c_str());
  return 0;
}

int cmd_test_beta(const data_args& d, const fit_args& f, const std::string& outdir) {
  dataset_ptr data(nullptr, plsim_dataset_free);
  if (int rc = load_data(d, data); rc != 0) return rc;

  plsim_fit_options opt = make_options(f);
  plsim_beta_test* raw = nullptr;
  if (int rc = check(plsim_test_beta_run(data.get(), &opt, &raw), "test-beta"); rc != 0)
    return rc;
  beta_test_ptr test(raw, plsim_beta_test_free);

  double t_n = 0, p_value = 1, rss0 = 0, rss1 = 0;
  int df = 0;
  plsim_test_beta_stats(test.get(), &t_n, &df, &p_value, &rss0, &rss1);
  std::printf("test-beta: T_n=%.6g df=%d p=%.6g rss0=%.6g rss1=%.6g\n", t_n, df, p_value,
              rss0, rss1);

  std::string path = joined(outdir, "tests.json");
  if (int rc = check(plsim_tests_write_json(test.get(), nullptr, path.c_str()),
                     "writing tests.json");
      rc != 0)
    return rc;
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

int cmd_test_eta(const data_args& d, const fit_args& f, const std::string& null_link,
                 double test_bandwidth, const std::string& outdir) {
  dataset_ptr data(nullptr, plsim_dataset_free);
  if (int rc = load_data(d, data); rc != 0) return rc;

  plsim_fit_options opt = make_options(f);
  int link = null_link == "constant" ? PLSIM_LINK_CONSTANT : PLSIM_LINK_LINEAR;
  plsim_eta_test* raw = nullptr;
  if (int rc = check(plsim_test_eta_run(data.get(), &opt, link, test_bandwidth, &raw),
                     "test-eta");
      rc != 0)
    return rc;
  eta_test_ptr test(raw, plsim_eta_test_free);

  double v_n_sq = 0, p_value = 1, s_n = 0, b = 0;
  plsim_test_eta_stats(test.get(), &v_n_sq, &p_value, &s_n, &b);
  std::printf("test-eta: V_n^2=%.6g p=%.6g S_n=%.6g b=%.6g\n", v_n_sq, p_value, s_n, b);

  std::string path = joined(outdir, "tests.json");
  if (int rc = check(plsim_tests_write_json(nullptr, test.get(), path.c_str()),
                     "writing tests.json");
      rc != 0)
    return rc;
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

int cmd_partition(const data_args& d, int64_t keep, double corr_threshold, double band_k,
                  double bandwidth, int threads, const std::string& outdir) {
  (void)threads;  // partition parallelism follows PLSIM_THREADS
  dataset_ptr data(nullptr, plsim_dataset_free);
  if (int rc = load_data(d, data); rc != 0) return rc;

  int64_t n = 0, p = 0, q = 0;
  plsim_dataset_dims(data.get(), &n, &p, &q);
  if (keep > 0 && keep < p) {
    plsim_dataset* screened = nullptr;
    if (int rc = check(plsim_dataset_screen(data.get(), keep, &screened), "screening");
        rc != 0)
      return rc;
    data.reset(screened);
    std::printf("screening kept %lld of %lld candidate columns\n",
                static_cast<long long>(keep), static_cast<long long>(p));
  }

  plsim_partition* raw = nullptr;
  if (int rc = check(plsim_partition_run(data.get(), corr_threshold, band_k, bandwidth, &raw),
                     "partition");
      rc != 0)
    return rc;
  partition_ptr part(raw, plsim_partition_free);

  int64_t n_linear = 0, n_index = 0;
  plsim_partition_counts(part.get(), &n_linear, &n_index);
  std::printf("partition: %lld linear, %lld index\n", static_cast<long long>(n_linear),
              static_cast<long long>(n_index));

  std::string path = joined(outdir, "partition.json");
  if (int rc = check(plsim_partition_write_json(part.get(), path.c_str()),
                     "writing partition.json");
      rc != 0)
    return rc;
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

struct sim_args {
  std::string model = "1a";
  std::string pipeline = "fit";
  int64_t n = 200;
  int64_t p = 100;
  int reps = 200;
  std::uint64_t seed = 20240501ULL;
  std::vector<double> signals;
  bool oracle = false;
  double bandwidth = 0.0;
  double test_bandwidth = 0.0;
  double level = 0.05;
  double lambda = 0.0;
  int threads = 0;
};

int cmd_simulate(const sim_args& s, const std::string& outdir) {
  plsim_sim_options opt;
  plsim_sim_options_init(&opt);
  if (s.model == "1a") opt.model = PLSIM_SIM_1A;
  else if (s.model == "1b-i") opt.model = PLSIM_SIM_1B_I;
  else if (s.model == "1b-ii") opt.model = PLSIM_SIM_1B_II;
  else if (s.model == "1b-iii") opt.model = PLSIM_SIM_1B_III;
  else opt.model = PLSIM_SIM_2;
  if (s.pipeline == "fit") opt.pipeline = PLSIM_PIPE_FIT;
  else if (s.pipeline == "test-beta") opt.pipeline = PLSIM_PIPE_TEST_BETA;
  else opt.pipeline = PLSIM_PIPE_TEST_ETA;
  opt.n = s.n;
  opt.p = s.p;
  opt.reps = s.reps;
  opt.seed = s.seed;
  if (!s.signals.empty()) {
    opt.signals = s.signals.data();
    opt.n_signals = static_cast<int>(s.signals.size());
  }
  opt.oracle = s.oracle ? 1 : 0;
  opt.h = s.bandwidth;
  opt.b = s.test_bandwidth;
  opt.level = s.level;
  opt.lambda = s.lambda;
  opt.threads = s.threads;

  plsim_summary* raw = nullptr;
  if (int rc = check(plsim_simulate_run(&opt, &raw), "simulate"); rc != 0) return rc;
  summary_ptr summary(raw, plsim_summary_free);

  int64_t rows = 0;
  plsim_summary_rows(summary.get(), &rows);
  std::string csv_path = joined(outdir, "summary.csv");
  std::string json_path = joined(outdir, "summary.json");
  if (int rc = check(plsim_summary_write_csv(summary.get(), csv_path.c_str()),
                     "writing summary.csv");
      rc != 0)
    return rc;
  if (int rc = check(plsim_summary_write_json(summary.get(), json_path.c_str()),
                     "writing summary.json");
      rc != 0)
    return rc;
  std::printf("simulate: %lld row(s); wrote %s and %s\n", static_cast<long long>(rows),
              csv_path.c_str(), json_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("plsim ") + plsim_version() +
               " — partially linear single-index models: penalized estimation, "
               "tests, and Monte Carlo studies"};
  app.require_subcommand(1);
  app.set_config("--config", "", "flat key=value config file; command line wins");
  app.get_config_formatter_base()->comment('#');

  data_args d;
  fit_args f;
  std::string outdir = ".";
  std::string null_link = "linear";
  double test_bandwidth = 0.0;
  int64_t keep = 0;
  double corr_threshold = 0.3;
  double band_k = 0.3;
  sim_args s;

  CLI::App* fit_cmd = app.add_subcommand("fit", "penalized profile fit");
  add_data_flags(fit_cmd, d, true);
  add_fit_flags(fit_cmd, f);
  fit_cmd->add_option("--outdir", outdir, "output directory");

  CLI::App* tb_cmd = app.add_subcommand("test-beta", "test H0: beta == 0");
  add_data_flags(tb_cmd, d, true);
  add_fit_flags(tb_cmd, f);
  tb_cmd->add_option("--outdir", outdir, "output directory");

  CLI::App* te_cmd = app.add_subcommand("test-eta", "test a parametric link family");
  add_data_flags(te_cmd, d, true);
  add_fit_flags(te_cmd, f);
  te_cmd->add_option("--null-link", null_link, "null family for the link")
      ->check(CLI::IsMember({"constant", "linear"}));
  te_cmd->add_option("--test-bandwidth", test_bandwidth,
                     "U-statistic bandwidth; <= 0 selects sd * n^(-2/5)");
  te_cmd->add_option("--outdir", outdir, "output directory");

  CLI::App* pa_cmd = app.add_subcommand("partition", "screen and split covariates");
  add_data_flags(pa_cmd, d, false);
  pa_cmd->add_option("--keep", keep, "screen to this many columns first (0: all)");
  pa_cmd->add_option("--corr-threshold", corr_threshold, "correlation gate");
  pa_cmd->add_option("--band-k", band_k, "band half-width multiplier");
  pa_cmd->add_option("--bandwidth", f.bandwidth, "per-variable smoother bandwidth (0: auto)");
  pa_cmd->add_option("--threads", f.threads, "worker threads");
  pa_cmd->add_option("--outdir", outdir, "output directory");

  CLI::App* sim_cmd = app.add_subcommand("simulate", "Monte Carlo study");
  sim_cmd->add_option("--model", s.model, "synthetic design")
      ->check(CLI::IsMember({"1a", "1b-i", "1b-ii", "1b-iii", "2"}));
  sim_cmd->add_option("--pipeline", s.pipeline, "per-replication procedure")
      ->check(CLI::IsMember({"fit", "test-beta", "test-eta"}));
  sim_cmd->add_option("--n", s.n, "sample size");
  sim_cmd->add_option("--p", s.p, "index-covariate dimension");
  sim_cmd->add_option("--reps", s.reps, "replications per signal level");
  sim_cmd->add_option("--seed", s.seed, "master seed");
  sim_cmd->add_option("--signal", s.signals, "signal levels (one table row each)");
  sim_cmd->add_flag("--oracle", s.oracle, "fit on the true support, unpenalized");
  sim_cmd->add_option("--bandwidth", s.bandwidth, "smoother bandwidth (0: model default)");
  sim_cmd->add_option("--test-bandwidth", s.test_bandwidth, "U-statistic bandwidth (0: auto)");
  sim_cmd->add_option("--level", s.level, "test level");
  sim_cmd->add_option("--lambda", s.lambda, "fixed penalty level (0: HBIC)");
  sim_cmd->add_option("--threads", s.threads, "worker threads; 0 honors PLSIM_THREADS");
  sim_cmd->add_option("--outdir", outdir, "output directory");

  CLI11_PARSE(app, argc, argv);

  if (fit_cmd->parsed()) return cmd_fit(d, f, outdir);
  if (tb_cmd->parsed()) return cmd_test_beta(d, f, outdir);
  if (te_cmd->parsed()) return cmd_test_eta(d, f, null_link, test_bandwidth, outdir);
  if (pa_cmd->parsed()) return cmd_partition(d, keep, corr_threshold, band_k, f.bandwidth,
                                             f.threads, outdir);
  if (sim_cmd->parsed()) return cmd_simulate(s, outdir);
  return 0;
}
