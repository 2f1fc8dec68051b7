// C boundary for the plsim core. Every entry point traps C++ exceptions and
// maps them onto plsim_status codes; the message is kept in thread-local
// storage for plsim_last_error().
#include "plsim/plsim.h"

#include <cmath>
#include <cstring>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "core/errors.hpp"
#include "core/inference.hpp"
#include "core/io.hpp"
#include "core/optimizer.hpp"
#include "core/simulation.hpp"

namespace {

std::string& tl_error() {
  static thread_local std::string msg;
  return msg;
}

template <class F>
plsim_status guarded(F&& body) {
  try {
    body();
    tl_error().clear();
    return PLSIM_OK;
  } catch (const plsim::error& e) {
    tl_error() = e.what();
    switch (e.category()) {
      case plsim::error_category::invalid_argument: return PLSIM_ERR_INVALID;
      case plsim::error_category::numeric: return PLSIM_ERR_NUMERIC;
      case plsim::error_category::io: return PLSIM_ERR_IO;
    }
    return PLSIM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    tl_error() = e.what();
    return PLSIM_ERR_INTERNAL;
  } catch (...) {
    tl_error() = "unknown error";
    return PLSIM_ERR_INTERNAL;
  }
}

plsim_status fail_arg(const char* msg) {
  tl_error() = msg;
  return PLSIM_ERR_INVALID;
}

std::vector<std::string> split_csv_list(const char* s) {
  std::vector<std::string> out;
  if (s == nullptr) return out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    size_t a = tok.find_first_not_of(" \t");
    size_t b = tok.find_last_not_of(" \t");
    if (a != std::string::npos) out.push_back(tok.substr(a, b - a + 1));
  }
  return out;
}

}  // namespace

struct plsim_dataset {
  std::shared_ptr<const plsim::loaded_dataset> ld;
};

struct plsim_fit {
  std::shared_ptr<const plsim::loaded_dataset> ld;
  plsim::fit_result fit;
  plsim::kernel_spec kern;
  plsim::penalty_spec pen;
};

struct plsim_beta_test {
  std::shared_ptr<const plsim::loaded_dataset> ld;
  plsim::beta_test_result res;
};

struct plsim_eta_test {
  std::shared_ptr<const plsim::loaded_dataset> ld;
  plsim::eta_test_result res;
};

struct plsim_partition {
  plsim::partition_result res;
  std::vector<std::string> names;
};

struct plsim_summary {
  plsim::summary_table table;
};

namespace {

// Resolve the option struct into core configuration; a nonpositive bandwidth
// triggers K-fold cross-validation around the rule-of-thumb value computed at
// the initialization index.
plsim::optim_config make_config(const plsim_fit_options& o) {
  plsim::optim_config cfg;
  cfg.max_outer_iters = o.max_outer_iters;
  cfg.outer_tol = o.outer_tol;
  cfg.cd_max_sweeps = o.cd_max_sweeps;
  cfg.cd_tol = o.cd_tol;
  cfg.lambda_grid_size = o.lambda_grid_size;
  cfg.lambda_min_ratio = o.lambda_min_ratio;
  cfg.warm_start = o.warm_start != 0;
  cfg.threads = o.threads > 0 ? o.threads : 0;
  return cfg;
}

plsim::penalty_spec make_penalty(const plsim_fit_options& o) {
  plsim::penalty_spec pen;
  pen.family = o.penalty == PLSIM_PENALTY_L1 ? plsim::penalty_family::l1
                                             : plsim::penalty_family::scad;
  pen.a = o.scad_a;
  pen.lambda = o.lambda > 0.0 ? o.lambda : 0.0;
  return pen;
}

plsim::kernel_spec make_kernel(const plsim::dataset& data, const plsim_fit_options& o,
                               const plsim::optim_config& cfg) {
  plsim::kernel_spec kern;
  kern.family = o.kernel == PLSIM_KERNEL_EPANECHNIKOV ? plsim::kernel_family::epanechnikov
                                                      : plsim::kernel_family::gaussian;
  if (o.h > 0.0) {
    kern.h = o.h;
    return kern;
  }
  plsim::theta th0 = plsim::initial_theta(data, cfg, false);
  Eigen::VectorXd gamma = data.x * th0.index.full_alpha();
  double sd = std::sqrt((gamma.array() - gamma.mean()).square().mean());
  if (!(sd > 0.0)) plsim::fail_numeric(plsim::error_code::zero_variance,
                                       "index values are constant; cannot pick a bandwidth");
  double h0 = 1.06 * sd * std::pow(static_cast<double>(data.n()), -0.2);
  std::vector<double> grid;
  for (double f : {0.5, 0.7, 0.85, 1.0, 1.2, 1.5, 2.0}) grid.push_back(f * h0);
  int folds = o.cv_folds > 1 ? o.cv_folds : 10;
  kern.h = plsim::select_bandwidth_cv(data, th0, grid, folds, kern.family);
  return kern;
}

plsim::fit_result run_fit(const plsim::dataset& data, const plsim::kernel_spec& kern,
                          plsim::penalty_spec pen, const plsim::optim_config& cfg,
                          double lambda_opt) {
  if (lambda_opt > 0.0) {
    pen.lambda = lambda_opt;
    return plsim::fit_plsim(data, kern, pen, cfg);
  }
  return plsim::select_lambda(data, kern, pen, cfg).fit;
}

}  // namespace

extern "C" {

const char* plsim_version(void) { return "0.1.0"; }

const char* plsim_last_error(void) { return tl_error().c_str(); }

plsim_status plsim_dataset_create(int64_t n, int64_t p, int64_t q, const double* y,
                                  const double* x, const double* z, plsim_dataset** out) {
  if (out == nullptr) return fail_arg("out is null");
  if (y == nullptr || x == nullptr || z == nullptr) return fail_arg("data pointer is null");
  if (n <= 0 || p <= 0 || q <= 0) return fail_arg("dimensions must be positive");
  return guarded([&] {
    plsim::dataset d;
    d.y = Eigen::Map<const Eigen::VectorXd>(y, n);
    d.x = Eigen::Map<const Eigen::MatrixXd>(x, n, p);
    d.z = Eigen::Map<const Eigen::MatrixXd>(z, n, q);
    d.validate();
    plsim::loaded_dataset ld = plsim::standardize_dataset(d, false);
    auto* h = new plsim_dataset{std::make_shared<plsim::loaded_dataset>(std::move(ld))};
    *out = h;
  });
}

plsim_status plsim_dataset_load_csv(const char* path, const char* response,
                                    const char* z_columns, int standardize,
                                    plsim_dataset** out) {
  if (out == nullptr) return fail_arg("out is null");
  if (path == nullptr || response == nullptr) return fail_arg("path/response is null");
  return guarded([&] {
    plsim::dataset_roles roles;
    roles.response = response;
    roles.linear = split_csv_list(z_columns);
    plsim::loaded_dataset ld = plsim::load_and_standardize(path, roles, standardize != 0);
    *out = new plsim_dataset{std::make_shared<plsim::loaded_dataset>(std::move(ld))};
  });
}

plsim_status plsim_dataset_dims(const plsim_dataset* data, int64_t* n, int64_t* p, int64_t* q) {
  if (data == nullptr) return fail_arg("dataset is null");
  if (n) *n = data->ld->data.n();
  if (p) *p = data->ld->data.p();
  if (q) *q = data->ld->data.q();
  tl_error().clear();
  return PLSIM_OK;
}

plsim_status plsim_dataset_screen(const plsim_dataset* data, int64_t keep, plsim_dataset** out) {
  if (out == nullptr) return fail_arg("out is null");
  if (data == nullptr) return fail_arg("dataset is null");
  return guarded([&] {
    std::vector<Eigen::Index> kept = plsim::screen_features(data->ld->data, keep);
    const plsim::loaded_dataset& src = *data->ld;
    plsim::loaded_dataset ld = src;
    ld.data.x.resize(src.data.n(), static_cast<Eigen::Index>(kept.size()));
    ld.x_names.clear();
    ld.x_mean.resize(kept.size());
    ld.x_scale.resize(kept.size());
    for (std::size_t k = 0; k < kept.size(); ++k) {
      ld.data.x.col(static_cast<Eigen::Index>(k)) = src.data.x.col(kept[k]);
      ld.x_names.push_back(src.x_names[static_cast<std::size_t>(kept[k])]);
      ld.x_mean(static_cast<Eigen::Index>(k)) = src.x_mean(kept[k]);
      ld.x_scale(static_cast<Eigen::Index>(k)) = src.x_scale(kept[k]);
    }
    *out = new plsim_dataset{std::make_shared<plsim::loaded_dataset>(std::move(ld))};
  });
}

void plsim_dataset_free(plsim_dataset* data) { delete data; }

void plsim_fit_options_init(plsim_fit_options* opt) {
  if (opt == nullptr) return;
  opt->kernel = PLSIM_KERNEL_GAUSSIAN;
  opt->h = 0.0;
  opt->cv_folds = 10;
  opt->penalty = PLSIM_PENALTY_SCAD;
  opt->lambda = 0.0;
  opt->scad_a = 3.7;
  opt->lambda_grid_size = 30;
  opt->lambda_min_ratio = 0.05;
  opt->max_outer_iters = 50;
  opt->outer_tol = 1e-6;
  opt->cd_max_sweeps = 2000;
  opt->cd_tol = 1e-10;
  opt->warm_start = 1;
  opt->threads = 0;
}

plsim_status plsim_fit_run(const plsim_dataset* data, const plsim_fit_options* opt,
                           plsim_fit** out) {
  if (out == nullptr) return fail_arg("out is null");
  if (data == nullptr || opt == nullptr) return fail_arg("dataset/options is null");
  return guarded([&] {
    plsim::optim_config cfg = make_config(*opt);
    plsim::penalty_spec pen = make_penalty(*opt);
    plsim::kernel_spec kern = make_kernel(data->ld->data, *opt, cfg);
    plsim::fit_result fr = run_fit(data->ld->data, kern, pen, cfg, opt->lambda);
    pen.lambda = fr.lambda;
    *out = new plsim_fit{data->ld, std::move(fr), kern, pen};
  });
}

plsim_status plsim_fit_beta(const plsim_fit* fit, double* beta) {
  if (fit == nullptr || beta == nullptr) return fail_arg("fit/beta is null");
  Eigen::Map<Eigen::VectorXd>(beta, fit->fit.est.beta.size()) = fit->fit.est.beta;
  tl_error().clear();
  return PLSIM_OK;
}

plsim_status plsim_fit_alpha(const plsim_fit* fit, double* alpha) {
  if (fit == nullptr || alpha == nullptr) return fail_arg("fit/alpha is null");
  return guarded([&] {
    Eigen::VectorXd a = fit->fit.est.index.full_alpha();
    Eigen::Map<Eigen::VectorXd>(alpha, a.size()) = a;
  });
}

plsim_status plsim_fit_active_set(const plsim_fit* fit, int64_t* idx, int64_t cap,
                                  int64_t* count) {
  if (fit == nullptr || count == nullptr) return fail_arg("fit/count is null");
  const auto& act = fit->fit.active;
  *count = static_cast<int64_t>(act.size());
  if (idx != nullptr) {
    int64_t m = std::min<int64_t>(cap, *count);
    for (int64_t i = 0; i < m; ++i) idx[i] = static_cast<int64_t>(act[i]);
  }
  tl_error().clear();
  return PLSIM_OK;
}

plsim_status plsim_fit_stats(const plsim_fit* fit, double* rss, double* lambda, double* h,
                             int* converged, int* iterations) {
  if (fit == nullptr) return fail_arg("fit is null");
  if (rss) *rss = fit->fit.rss;
  if (lambda) *lambda = fit->fit.lambda;
  if (h) *h = fit->fit.h;
  if (converged) *converged = fit->fit.converged ? 1 : 0;
  if (iterations) *iterations = fit->fit.iterations;
  tl_error().clear();
  return PLSIM_OK;
}

plsim_status plsim_fit_write_json(const plsim_fit* fit, const char* path) {
  if (fit == nullptr || path == nullptr) return fail_arg("fit/path is null");
  return guarded([&] {
    plsim::write_fit_json(fit->fit, fit->ld->data, fit->kern, fit->pen, fit->ld.get(), path);
  });
}

plsim_status plsim_fit_write_curve_csv(const plsim_fit* fit, const char* path) {
  if (fit == nullptr || path == nullptr) return fail_arg("fit/path is null");
  return guarded([&] { plsim::write_curve_csv(fit->fit, fit->ld->data, path); });
}

void plsim_fit_free(plsim_fit* fit) { delete fit; }

plsim_status plsim_test_beta_run(const plsim_dataset* data, const plsim_fit_options* opt,
                                 plsim_beta_test** out) {
  if (out == nullptr) return fail_arg("out is null");
  if (data == nullptr || opt == nullptr) return fail_arg("dataset/options is null");
  return guarded([&] {
    plsim::optim_config cfg = make_config(*opt);
    plsim::penalty_spec pen = make_penalty(*opt);
    plsim::kernel_spec kern = make_kernel(data->ld->data, *opt, cfg);
    plsim::beta_test_result res = plsim::test_beta(data->ld->data, kern, pen, cfg);
    *out = new plsim_beta_test{data->ld, std::move(res)};
  });
}

plsim_status plsim_test_beta_stats(const plsim_beta_test* t, double* t_n, int* df,
                                   double* p_value, double* rss0, double* rss1) {
  if (t == nullptr) return fail_arg("test is null");
  if (t_n) *t_n = t->res.t_n;
  if (df) *df = t->res.df;
  if (p_value) *p_value = t->res.p_value;
  if (rss0) *rss0 = t->res.rss0;
  if (rss1) *rss1 = t->res.rss1;
  tl_error().clear();
  return PLSIM_OK;
}

void plsim_beta_test_free(plsim_beta_test* t) { delete t; }

plsim_status plsim_test_eta_run(const plsim_dataset* data, const plsim_fit_options* opt,
                                int link, double b, plsim_eta_test** out) {
  if (out == nullptr) return fail_arg("out is null");
  if (data == nullptr || opt == nullptr) return fail_arg("dataset/options is null");
  if (link != PLSIM_LINK_CONSTANT && link != PLSIM_LINK_LINEAR)
    return fail_arg("unknown null link family");
  return guarded([&] {
    plsim::optim_config cfg = make_config(*opt);
    plsim::penalty_spec pen = make_penalty(*opt);
    plsim::kernel_spec kern = make_kernel(data->ld->data, *opt, cfg);
    plsim::fit_result fr = run_fit(data->ld->data, kern, pen, cfg, opt->lambda);
    plsim::null_link_spec spec;
    spec.family = link == PLSIM_LINK_CONSTANT ? plsim::link_family::constant
                                              : plsim::link_family::linear;
    plsim::eta_test_result res =
        plsim::test_eta(data->ld->data, fr, spec, plsim::kernel_family::gaussian, b);
    *out = new plsim_eta_test{data->ld, std::move(res)};
  });
}

plsim_status plsim_test_eta_stats(const plsim_eta_test* t, double* v_n_sq, double* p_value,
                                  double* s_n, double* b_used) {
  if (t == nullptr) return fail_arg("test is null");
  if (v_n_sq) *v_n_sq = t->res.v_n_sq;
  if (p_value) *p_value = t->res.p_value;
  if (s_n) *s_n = t->res.s_n;
  if (b_used) *b_used = t->res.b;
  tl_error().clear();
  return PLSIM_OK;
}

void plsim_eta_test_free(plsim_eta_test* t) { delete t; }

plsim_status plsim_tests_write_json(const plsim_beta_test* bt, const plsim_eta_test* et,
                                    const char* path) {
  if (path == nullptr) return fail_arg("path is null");
  if (bt == nullptr && et == nullptr) return fail_arg("both tests are null");
  return guarded([&] {
    plsim::write_tests_json(bt ? &bt->res : nullptr, et ? &et->res : nullptr, path);
  });
}

plsim_status plsim_screen_features(const plsim_dataset* data, int64_t keep, int64_t* idx) {
  if (data == nullptr || idx == nullptr) return fail_arg("dataset/idx is null");
  return guarded([&] {
    std::vector<Eigen::Index> kept = plsim::screen_features(data->ld->data, keep);
    for (size_t i = 0; i < kept.size(); ++i) idx[i] = static_cast<int64_t>(kept[i]);
  });
}

plsim_status plsim_partition_run(const plsim_dataset* data, double corr_threshold,
                                 double band_k, double h, plsim_partition** out) {
  if (out == nullptr) return fail_arg("out is null");
  if (data == nullptr) return fail_arg("dataset is null");
  return guarded([&] {
    plsim::partition_options popt;
    if (corr_threshold > 0.0) popt.corr_threshold = corr_threshold;
    if (band_k > 0.0) popt.band_k = band_k;
    popt.h = h;
    plsim::partition_result res = plsim::partition_variables(data->ld->data, popt);
    *out = new plsim_partition{std::move(res), data->ld->x_names};
  });
}

plsim_status plsim_partition_counts(const plsim_partition* part, int64_t* n_linear,
                                    int64_t* n_index) {
  if (part == nullptr) return fail_arg("partition is null");
  if (n_linear) *n_linear = static_cast<int64_t>(part->res.linear_vars.size());
  if (n_index) *n_index = static_cast<int64_t>(part->res.index_vars.size());
  tl_error().clear();
  return PLSIM_OK;
}

plsim_status plsim_partition_linear(const plsim_partition* part, int64_t* idx, int64_t cap) {
  if (part == nullptr || idx == nullptr) return fail_arg("partition/idx is null");
  int64_t m = std::min<int64_t>(cap, static_cast<int64_t>(part->res.linear_vars.size()));
  for (int64_t i = 0; i < m; ++i) idx[i] = static_cast<int64_t>(part->res.linear_vars[i]);
  tl_error().clear();
  return PLSIM_OK;
}

plsim_status plsim_partition_write_json(const plsim_partition* part, const char* path) {
  if (part == nullptr || path == nullptr) return fail_arg("partition/path is null");
  return guarded([&] { plsim::write_partition_json(part->res, part->names, path); });
}

void plsim_partition_free(plsim_partition* part) { delete part; }

void plsim_sim_options_init(plsim_sim_options* opt) {
  if (opt == nullptr) return;
  opt->model = PLSIM_SIM_1A;
  opt->n = 200;
  opt->p = 100;
  opt->reps = 200;
  opt->seed = 20240501ULL;
  opt->signals = nullptr;
  opt->n_signals = 0;
  opt->pipeline = PLSIM_PIPE_FIT;
  opt->oracle = 0;
  opt->h = 0.0;
  opt->b = 0.0;
  opt->level = 0.05;
  opt->lambda = 0.0;
  opt->threads = 0;
}

plsim_status plsim_simulate_run(const plsim_sim_options* opt, plsim_summary** out) {
  if (out == nullptr) return fail_arg("out is null");
  if (opt == nullptr) return fail_arg("options is null");
  return guarded([&] {
    plsim::sim_scenario scn;
    switch (opt->model) {
      case PLSIM_SIM_1A: scn.model = plsim::sim_model::m1a; break;
      case PLSIM_SIM_1B_I: scn.model = plsim::sim_model::m1b_i; break;
      case PLSIM_SIM_1B_II: scn.model = plsim::sim_model::m1b_ii; break;
      case PLSIM_SIM_1B_III: scn.model = plsim::sim_model::m1b_iii; break;
      case PLSIM_SIM_2: scn.model = plsim::sim_model::m2; break;
      default:
        plsim::fail_invalid(plsim::error_code::unknown_scenario, "unknown simulation model");
    }
    scn.n = opt->n;
    scn.p = opt->p;
    scn.h = opt->h;
    scn.b = opt->b;
    scn.seed = opt->seed;

    std::vector<double> signals;
    if (opt->signals != nullptr && opt->n_signals > 0)
      signals.assign(opt->signals, opt->signals + opt->n_signals);
    else
      signals.push_back(0.0);

    plsim::sim_options so;
    switch (opt->pipeline) {
      case PLSIM_PIPE_FIT: so.pipeline = plsim::sim_pipeline::fit; break;
      case PLSIM_PIPE_TEST_BETA: so.pipeline = plsim::sim_pipeline::test_beta; break;
      case PLSIM_PIPE_TEST_ETA: so.pipeline = plsim::sim_pipeline::test_eta; break;
      default:
        plsim::fail_invalid(plsim::error_code::invalid_option, "unknown simulation pipeline");
    }
    so.oracle = opt->oracle != 0;
    so.reps = opt->reps;
    so.level = opt->level;
    so.threads = opt->threads > 0 ? opt->threads : 0;
    if (opt->lambda > 0.0) so.penalty.lambda = opt->lambda;
    *out = new plsim_summary{plsim::run_replications(scn, signals, so)};
  });
}

plsim_status plsim_summary_rows(const plsim_summary* s, int64_t* rows) {
  if (s == nullptr || rows == nullptr) return fail_arg("summary/rows is null");
  *rows = static_cast<int64_t>(s->table.rows.size());
  tl_error().clear();
  return PLSIM_OK;
}

plsim_status plsim_summary_write_csv(const plsim_summary* s, const char* path) {
  if (s == nullptr || path == nullptr) return fail_arg("summary/path is null");
  return guarded([&] { plsim::write_summary_csv(s->table, path); });
}

plsim_status plsim_summary_write_json(const plsim_summary* s, const char* path) {
  if (s == nullptr || path == nullptr) return fail_arg("summary/path is null");
  return guarded([&] { plsim::write_summary_json(s->table, path); });
}

void plsim_summary_free(plsim_summary* s) { delete s; }

}  // extern "C"
