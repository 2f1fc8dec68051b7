/* C interface to the plsim library: estimation and testing for
 * ultrahigh-dimensional partially linear single-index models
 *   y = eta(alpha'x) + beta'z + eps,  |alpha| = 1, alpha_1 > 0.
 *
 * All entry points return a plsim_status; on failure plsim_last_error()
 * describes the problem (thread-local). Handles are opaque and must be
 * released with the matching _free function. Vector outputs use caller-owned
 * buffers whose required length is documented per call.
 */
#ifndef PLSIM_H
#define PLSIM_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum plsim_status {
  PLSIM_OK = 0,
  PLSIM_ERR_INVALID = 1, /* bad arguments or malformed input data */
  PLSIM_ERR_NUMERIC = 2, /* numerical failure (singular fits, divergence, ...) */
  PLSIM_ERR_IO = 3,      /* file could not be read or written */
  PLSIM_ERR_INTERNAL = 4
} plsim_status;

const char* plsim_version(void);
/* Message for the most recent failure on this thread ("" if none). */
const char* plsim_last_error(void);

/* ---------- data ---------- */

typedef struct plsim_dataset plsim_dataset;

/* Column-major x (n*p) and z (n*q). */
plsim_status plsim_dataset_create(int64_t n, int64_t p, int64_t q, const double* y,
                                  const double* x, const double* z, plsim_dataset** out);
/* Loads a numeric CSV with a header row. z_columns is a comma-separated list
 * of column names; every remaining non-response column becomes an index
 * covariate. standardize != 0 rescales all columns to mean 0 / variance 1. */
plsim_status plsim_dataset_load_csv(const char* path, const char* response,
                                    const char* z_columns, int standardize,
                                    plsim_dataset** out);
plsim_status plsim_dataset_dims(const plsim_dataset* data, int64_t* n, int64_t* p, int64_t* q);
/* New dataset keeping only the `keep` index covariates most correlated with
 * the response (column order preserved). */
plsim_status plsim_dataset_screen(const plsim_dataset* data, int64_t keep, plsim_dataset** out);
void plsim_dataset_free(plsim_dataset* data);

/* ---------- fitting ---------- */

typedef enum plsim_kernel { PLSIM_KERNEL_GAUSSIAN = 0, PLSIM_KERNEL_EPANECHNIKOV = 1 } plsim_kernel;
typedef enum plsim_penalty { PLSIM_PENALTY_SCAD = 0, PLSIM_PENALTY_L1 = 1 } plsim_penalty;

typedef struct plsim_fit_options {
  int kernel;            /* plsim_kernel */
  double h;              /* bandwidth; <= 0 selects by K-fold cross-validation */
  int cv_folds;          /* folds for the bandwidth search (default 10) */
  int penalty;           /* plsim_penalty */
  double lambda;         /* > 0 fixes lambda; <= 0 selects by HBIC over a grid */
  double scad_a;         /* SCAD shape (default 3.7) */
  int lambda_grid_size;  /* automatic grid length (default 30) */
  double lambda_min_ratio; /* grid floor as a fraction of lambda_max (default 0.05) */
  int max_outer_iters;
  double outer_tol;
  int cd_max_sweeps;
  double cd_tol;
  int warm_start;        /* nonzero: sweep the grid warm-started (sequential) */
  int threads;           /* <= 0: PLSIM_THREADS env var, then hardware */
} plsim_fit_options;

void plsim_fit_options_init(plsim_fit_options* opt);

typedef struct plsim_fit plsim_fit;

plsim_status plsim_fit_run(const plsim_dataset* data, const plsim_fit_options* opt,
                           plsim_fit** out);
plsim_status plsim_fit_beta(const plsim_fit* fit, double* beta /* q */);
plsim_status plsim_fit_alpha(const plsim_fit* fit, double* alpha /* p */);
/* Writes up to cap indices (0-based positions into alpha_2..alpha_p);
 * *count receives the active-set size. */
plsim_status plsim_fit_active_set(const plsim_fit* fit, int64_t* idx, int64_t cap,
                                  int64_t* count);
plsim_status plsim_fit_stats(const plsim_fit* fit, double* rss, double* lambda, double* h,
                             int* converged, int* iterations);
plsim_status plsim_fit_write_json(const plsim_fit* fit, const char* path);
plsim_status plsim_fit_write_curve_csv(const plsim_fit* fit, const char* path);
void plsim_fit_free(plsim_fit* fit);

/* ---------- tests ---------- */

typedef struct plsim_beta_test plsim_beta_test;

plsim_status plsim_test_beta_run(const plsim_dataset* data, const plsim_fit_options* opt,
                                 plsim_beta_test** out);
plsim_status plsim_test_beta_stats(const plsim_beta_test* t, double* t_n, int* df,
                                   double* p_value, double* rss0, double* rss1);
void plsim_beta_test_free(plsim_beta_test* t);

typedef enum plsim_link { PLSIM_LINK_CONSTANT = 0, PLSIM_LINK_LINEAR = 1 } plsim_link;

typedef struct plsim_eta_test plsim_eta_test;

/* link: null family for the link; b <= 0 selects sd(alpha'x) * n^(-2/5). */
plsim_status plsim_test_eta_run(const plsim_dataset* data, const plsim_fit_options* opt,
                                int link, double b, plsim_eta_test** out);
plsim_status plsim_test_eta_stats(const plsim_eta_test* t, double* v_n_sq, double* p_value,
                                  double* s_n, double* b_used);
void plsim_eta_test_free(plsim_eta_test* t);

/* Writes tests.json; either test handle may be NULL. */
plsim_status plsim_tests_write_json(const plsim_beta_test* bt, const plsim_eta_test* et,
                                    const char* path);

/* ---------- screening / partition ---------- */

plsim_status plsim_screen_features(const plsim_dataset* data, int64_t keep,
                                   int64_t* idx /* keep entries */);

typedef struct plsim_partition plsim_partition;

plsim_status plsim_partition_run(const plsim_dataset* data, double corr_threshold,
                                 double band_k, double h, plsim_partition** out);
plsim_status plsim_partition_counts(const plsim_partition* part, int64_t* n_linear,
                                    int64_t* n_index);
plsim_status plsim_partition_linear(const plsim_partition* part, int64_t* idx, int64_t cap);
plsim_status plsim_partition_write_json(const plsim_partition* part, const char* path);
void plsim_partition_free(plsim_partition* part);

/* ---------- simulation ---------- */

typedef enum plsim_sim_model {
  PLSIM_SIM_1A = 0,
  PLSIM_SIM_1B_I = 1,
  PLSIM_SIM_1B_II = 2,
  PLSIM_SIM_1B_III = 3,
  PLSIM_SIM_2 = 4
} plsim_sim_model;

typedef enum plsim_sim_pipeline {
  PLSIM_PIPE_FIT = 0,
  PLSIM_PIPE_TEST_BETA = 1,
  PLSIM_PIPE_TEST_ETA = 2
} plsim_sim_pipeline;

typedef struct plsim_sim_options {
  int model;      /* plsim_sim_model */
  int64_t n, p;
  int reps;
  uint64_t seed;
  const double* signals; /* one table row per signal level; NULL: single 0.0 */
  int n_signals;
  int pipeline;   /* plsim_sim_pipeline */
  int oracle;     /* fit restricted to the true support, no penalty */
  double h;       /* <= 0: model default */
  double b;       /* <= 0: automatic */
  double level;
  double lambda;  /* > 0 fixed; <= 0 HBIC-selected */
  int threads;    /* <= 0: PLSIM_THREADS env var, then hardware */
} plsim_sim_options;

void plsim_sim_options_init(plsim_sim_options* opt);

typedef struct plsim_summary plsim_summary;

plsim_status plsim_simulate_run(const plsim_sim_options* opt, plsim_summary** out);
plsim_status plsim_summary_rows(const plsim_summary* s, int64_t* rows);
plsim_status plsim_summary_write_csv(const plsim_summary* s, const char* path);
plsim_status plsim_summary_write_json(const plsim_summary* s, const char* path);
void plsim_summary_free(plsim_summary* s);

#ifdef __cplusplus
}
#endif

#endif /* PLSIM_H */
