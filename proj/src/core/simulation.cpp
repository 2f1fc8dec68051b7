#include "core/simulation.hpp"

#include <algorithm>
#include <cmath>

#include "core/parallel.hpp"

namespace plsim {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Eigen::VectorXd draw_normals(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = nd(rng);
  return v;
}

}  // namespace

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t signal_idx, std::uint64_t rep) {
  std::uint64_t s = splitmix64(seed ^ splitmix64(signal_idx + 1));
  return splitmix64(s ^ splitmix64(rep + 1));
}

Eigen::MatrixXd gen_ar_normal(Eigen::Index n, Eigen::Index dim, double rho,
                              std::mt19937_64& rng) {
  if (!(rho >= 0.0 && rho < 1.0))
    fail_invalid(error_code::invalid_option, "AR parameter must lie in [0, 1)");
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd v(n, dim);
  double innov = std::sqrt(1.0 - rho * rho);
  for (Eigen::Index i = 0; i < n; ++i) {
    v(i, 0) = nd(rng);
    for (Eigen::Index k = 1; k < dim; ++k) v(i, k) = rho * v(i, k - 1) + innov * nd(rng);
  }
  return v;
}

double default_bandwidth(sim_model model) {
  switch (model) {
    case sim_model::m1a:
      return 0.37;
    case sim_model::m1b_i:
      return 0.37;
    case sim_model::m1b_ii:
      return 0.44;
    case sim_model::m1b_iii:
      return 0.44;
    case sim_model::m2:
      return 0.37;
  }
  return 0.37;
}

std::string to_string(sim_model model) {
  switch (model) {
    case sim_model::m1a:
      return "1a";
    case sim_model::m1b_i:
      return "1b-i";
    case sim_model::m1b_ii:
      return "1b-ii";
    case sim_model::m1b_iii:
      return "1b-iii";
    case sim_model::m2:
      return "2";
  }
  return "?";
}

std::string to_string(sim_pipeline pipe) {
  switch (pipe) {
    case sim_pipeline::fit:
      return "fit";
    case sim_pipeline::test_beta:
      return "test-beta";
    case sim_pipeline::test_eta:
      return "test-eta";
  }
  return "?";
}

dataset gen_dataset(const sim_scenario& scn, double signal, std::uint64_t rep_seed,
                    sim_truth* truth) {
  const Eigen::Index n = scn.n;
  const Eigen::Index p = scn.p;
  if (n < 10) fail_invalid(error_code::invalid_option, "scenario needs n >= 10");
  if (p < 10) fail_invalid(error_code::invalid_option, "scenario needs p >= 10");

  std::mt19937_64 rng(rep_seed);
  dataset d;
  sim_truth tr;
  tr.alpha = Eigen::VectorXd::Zero(p);
  tr.active = {0, 8};              // free coordinates of alpha_2 and alpha_10
  tr.alpha_report = {0, 1, 9};     // alpha_1, alpha_2, alpha_10

  const bool model1a_layout = scn.model == sim_model::m1a || scn.model == sim_model::m2;
  if (model1a_layout) {
    double s6 = std::sqrt(6.0);
    tr.alpha(0) = 2.0 / s6;
    tr.alpha(1) = 1.0 / s6;
    tr.alpha(9) = 1.0 / s6;
  } else {
    double s3 = std::sqrt(3.0);
    tr.alpha(0) = tr.alpha(1) = tr.alpha(9) = 1.0 / s3;
  }

  if (scn.model == sim_model::m1b_iii) {
    Eigen::MatrixXd v = gen_ar_normal(n, p + 2, 0.75, rng);
    d.x.resize(n, p);
    d.x.col(0) = v.col(0);
    d.x.col(1) = v.col(1);
    d.x.rightCols(p - 2) = v.middleCols(4, p - 2);
    d.z = v.middleCols(2, 2);
  } else {
    double rho = scn.model == sim_model::m1b_ii ? 0.75 : 0.25;
    d.x = gen_ar_normal(n, p, rho, rng);
    d.z = gen_ar_normal(n, 2, rho, rng);
  }
  Eigen::VectorXd eps = draw_normals(n, rng);

  Eigen::VectorXd gamma = d.x * tr.alpha;
  Eigen::VectorXd link(n);
  double noise_sd = 1.0;
  switch (scn.model) {
    case sim_model::m1a:
      link = gamma.array().exp().matrix();
      tr.beta = signal * Eigen::VectorXd::Ones(2);
      noise_sd = 1.0;
      break;
    case sim_model::m1b_i:
    case sim_model::m1b_ii:
    case sim_model::m1b_iii:
      link = (gamma.array() * (kPi / 2.0)).sin().matrix();
      tr.beta = signal * Eigen::VectorXd::Ones(2);
      noise_sd = 0.5;
      break;
    case sim_model::m2: {
      const double a = 1.3409, b = 0.3912;
      link = (gamma.array() +
              signal * ((gamma.array() - a) * (kPi / (b - a))).sin()).matrix();
      tr.beta = Eigen::VectorXd(2);
      tr.beta << 0.5, -0.3;
      noise_sd = 0.75;
      break;
    }
  }

  d.y = link + d.z * tr.beta + noise_sd * eps;
  if (truth) *truth = tr;
  return d;
}

namespace {

struct rep_record {
  bool ok = false;
  double tp = 0.0, fp = 0.0;
  Eigen::VectorXd beta_err, alpha_err;
  double stat = 0.0, pvalue = 1.0;
  bool reject = false;
  int descent_violations = 0;
  bool has_fit_metrics = false;
};

int trace_violations(const std::vector<double>& trace) {
  int v = 0;
  for (std::size_t k = 1; k < trace.size(); ++k)
    if (trace[k] > trace[k - 1] + 1e-6) ++v;
  return v;
}

fit_result run_fit(const dataset& d, const kernel_spec& kern, const sim_truth& tr,
                   const sim_options& opt) {
  if (opt.oracle) return fit_restricted(d, kern, tr.active, opt.optim, true);
  if (opt.penalty.lambda > 0.0) return fit_plsim(d, kern, opt.penalty, opt.optim);
  return select_lambda(d, kern, opt.penalty, opt.optim, false).fit;
}

void fill_fit_metrics(rep_record& rec, const fit_result& fr, const sim_truth& tr,
                      Eigen::Index p) {
  Eigen::Index tp = 0, fp = 0;
  for (Eigen::Index j : fr.active) {
    if (std::binary_search(tr.active.begin(), tr.active.end(), j))
      ++tp;
    else
      ++fp;
  }
  rec.tp = tr.active.empty() ? 1.0 : static_cast<double>(tp) / tr.active.size();
  Eigen::Index nulls = p - 1 - static_cast<Eigen::Index>(tr.active.size());
  rec.fp = nulls > 0 ? static_cast<double>(fp) / nulls : 0.0;

  rec.beta_err = fr.est.beta - tr.beta;
  Eigen::VectorXd alpha_full = fr.est.index.full_alpha();
  rec.alpha_err.resize(tr.alpha_report.size());
  for (std::size_t k = 0; k < tr.alpha_report.size(); ++k)
    rec.alpha_err(k) = alpha_full(tr.alpha_report[k]) - tr.alpha(tr.alpha_report[k]);
  rec.descent_violations += trace_violations(fr.objective_trace);
  rec.has_fit_metrics = true;
}

}  // namespace

summary_table run_replications(const sim_scenario& scn, const std::vector<double>& signals,
                               const sim_options& opt) {
  if (signals.empty()) {
    summary_table t;
    t.seed = scn.seed;
    t.level = opt.level;
    t.h = scn.h > 0.0 ? scn.h : default_bandwidth(scn.model);
    return t;
  }
  kernel_spec kern{kernel_family::gaussian, scn.h > 0.0 ? scn.h : default_bandwidth(scn.model)};

  summary_table table;
  table.seed = scn.seed;
  table.level = opt.level;
  table.h = kern.h;

  // Replications run single-threaded inside; parallelism is over reps only.
  optim_config inner = opt.optim;
  inner.threads = 1;
  sim_options local = opt;
  local.optim = inner;

  for (std::size_t si = 0; si < signals.size(); ++si) {
    double signal = signals[si];
    std::vector<rep_record> recs(opt.reps);

    parallel_for(
        static_cast<std::size_t>(opt.reps),
        [&](std::size_t r) {
          rep_record& rec = recs[r];
          try {
            sim_truth tr;
            dataset d = gen_dataset(scn, signal, substream_seed(scn.seed, si, r), &tr);
            switch (opt.pipeline) {
              case sim_pipeline::fit: {
                fit_result fr = run_fit(d, kern, tr, local);
                fill_fit_metrics(rec, fr, tr, scn.p);
                break;
              }
              case sim_pipeline::test_beta: {
                beta_test_result bt = test_beta(d, kern, local.penalty, local.optim,
                                                local.oracle, &tr.active);
                rec.stat = bt.t_n;
                rec.pvalue = bt.p_value;
                rec.reject = bt.p_value < opt.level;
                rec.descent_violations += trace_violations(bt.fit_alt.objective_trace);
                rec.descent_violations += trace_violations(bt.fit_null.objective_trace);
                break;
              }
              case sim_pipeline::test_eta: {
                fit_result fr = run_fit(d, kern, tr, local);
                null_link_spec link;
                link.family = local.null_link;
                eta_test_result et = test_eta(d, fr, link, kernel_family::gaussian, scn.b);
                rec.stat = et.v_n_sq;
                rec.pvalue = et.p_value;
                rec.reject = et.p_value < opt.level;
                rec.descent_violations += trace_violations(fr.objective_trace);
                break;
              }
            }
            rec.ok = true;
          } catch (const error&) {
            rec.ok = false;
          }
        },
        opt.threads);

    summary_row row;
    row.model = to_string(scn.model);
    row.pipeline = std::string(opt.oracle ? "oracle-" : "") + to_string(opt.pipeline);
    row.n = scn.n;
    row.p = scn.p;
    row.signal = signal;
    row.reps = opt.reps;

    int ok = 0;
    double tp = 0, fp = 0, stat = 0;
    int rejects = 0;
    Eigen::VectorXd bias_b, mse_b, bias_a, mse_a;
    bool any_fit = false;
    for (const rep_record& rec : recs) {
      row.descent_violations += rec.descent_violations;
      if (!rec.ok) continue;
      ++ok;
      stat += rec.stat;
      if (rec.reject) ++rejects;
      if (rec.has_fit_metrics) {
        if (!any_fit) {
          bias_b = Eigen::VectorXd::Zero(rec.beta_err.size());
          mse_b = Eigen::VectorXd::Zero(rec.beta_err.size());
          bias_a = Eigen::VectorXd::Zero(rec.alpha_err.size());
          mse_a = Eigen::VectorXd::Zero(rec.alpha_err.size());
          any_fit = true;
        }
        tp += rec.tp;
        fp += rec.fp;
        bias_b += rec.beta_err;
        mse_b += rec.beta_err.cwiseAbs2();
        bias_a += rec.alpha_err;
        mse_a += rec.alpha_err.cwiseAbs2();
      }
    }
    row.failures = opt.reps - ok;
    if (ok > 0) {
      if (any_fit) {
        row.tpr = 100.0 * tp / ok;
        row.fpr = 100.0 * fp / ok;
        for (Eigen::Index k = 0; k < bias_b.size(); ++k) {
          row.bias_beta.push_back(bias_b(k) / ok);
          row.mse_beta.push_back(mse_b(k) / ok);
        }
        for (Eigen::Index k = 0; k < bias_a.size(); ++k) {
          row.bias_alpha.push_back(bias_a(k) / ok);
          row.mse_alpha.push_back(mse_a(k) / ok);
        }
      }
      if (opt.pipeline != sim_pipeline::fit) {
        double rate = static_cast<double>(rejects) / ok;
        row.reject_rate = rate;
        row.reject_se = std::sqrt(rate * (1.0 - rate) / ok);
        row.mean_stat = stat / ok;
      }
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace plsim
