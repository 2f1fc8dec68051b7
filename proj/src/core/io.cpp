#include "core/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "core/parallel.hpp"
#include "core/smoother.hpp"

namespace plsim {

namespace {

using ordered_json = nlohmann::ordered_json;

std::ofstream open_out(const std::string& path) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(p, std::ios::binary);
  if (!out) fail_io("cannot open '" + path + "' for writing");
  return out;
}

double parse_number(const std::string& tok, std::size_t row, std::size_t col) {
  const char* b = tok.data();
  const char* e = b + tok.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  while (e > b && (*(e - 1) == ' ' || *(e - 1) == '\t')) --e;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e)
    fail_invalid(error_code::parse_error,
                 "row " + std::to_string(row) + ", column " + std::to_string(col) +
                     ": cannot parse '" + tok + "' as a number");
  if (!std::isfinite(v))
    fail_invalid(error_code::nonfinite_input,
                 "row " + std::to_string(row) + ", column " + std::to_string(col) +
                     ": non-finite value");
  return v;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

struct standardizer {
  Eigen::VectorXd mean, scale;
};

// Population standard deviations; near-constant columns are rejected.
standardizer column_stats(const Eigen::MatrixXd& m, const std::vector<std::string>& names) {
  standardizer s;
  s.mean.resize(m.cols());
  s.scale.resize(m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    double mu = m.col(j).mean();
    double sd = std::sqrt((m.col(j).array() - mu).square().sum() / m.rows());
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mu))))
      fail_invalid(error_code::constant_column,
                   "column '" + names[j] + "' is (numerically) constant");
    s.mean(j) = mu;
    s.scale(j) = sd;
  }
  return s;
}

void apply_standardize(Eigen::MatrixXd& m, const standardizer& s) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    m.col(j) = ((m.col(j).array() - s.mean(j)) / s.scale(j)).matrix();
}

ordered_json json_vector(const Eigen::VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

ordered_json json_optional(const std::optional<double>& v) {
  if (v) return *v;
  return nullptr;
}

void csv_cell(std::string& line, const std::optional<double>& v) {
  line.push_back(',');
  if (v) line += format_double(*v);
}

std::optional<double> nth(const std::vector<std::optional<double>>& v, std::size_t k) {
  return k < v.size() ? v[k] : std::nullopt;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

csv_table read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_io("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line))
    fail_invalid(error_code::parse_error, "'" + path + "' is empty");
  csv_table t;
  t.names = split_line(line);
  if (t.names.empty() || t.names[0].empty())
    fail_invalid(error_code::parse_error, "missing header row");

  std::vector<double> buf;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> toks = split_line(line);
    if (toks.size() != t.names.size())
      fail_invalid(error_code::parse_error,
                   "row " + std::to_string(rows + 2) + ": expected " +
                       std::to_string(t.names.size()) + " fields, got " +
                       std::to_string(toks.size()));
    for (std::size_t c = 0; c < toks.size(); ++c)
      buf.push_back(parse_number(toks[c], rows + 2, c + 1));
    ++rows;
  }
  if (rows == 0) fail_invalid(error_code::parse_error, "no data rows in '" + path + "'");
  t.values.resize(rows, t.names.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < t.names.size(); ++c)
      t.values(r, c) = buf[r * t.names.size() + c];
  return t;
}

loaded_dataset load_and_standardize(const std::string& path, const dataset_roles& roles,
                                    bool standardize) {
  csv_table t = read_csv(path);
  auto find = [&](const std::string& name) {
    for (std::size_t c = 0; c < t.names.size(); ++c)
      if (t.names[c] == name) return static_cast<Eigen::Index>(c);
    fail_invalid(error_code::unknown_column, "no column named '" + name + "'");
  };

  Eigen::Index yc = find(roles.response);
  std::vector<Eigen::Index> zc;
  for (const std::string& name : roles.linear) {
    Eigen::Index c = find(name);
    if (c == yc)
      fail_invalid(error_code::invalid_option, "response also listed as linear covariate");
    if (std::find(zc.begin(), zc.end(), c) != zc.end())
      fail_invalid(error_code::invalid_option, "duplicate linear covariate '" + name + "'");
    zc.push_back(c);
  }
  std::vector<Eigen::Index> xc;
  if (!roles.index.empty()) {
    for (const std::string& name : roles.index) {
      Eigen::Index c = find(name);
      if (c == yc || std::find(zc.begin(), zc.end(), c) != zc.end())
        fail_invalid(error_code::invalid_option,
                     "column '" + name + "' already has another role");
      if (std::find(xc.begin(), xc.end(), c) != xc.end())
        fail_invalid(error_code::invalid_option, "duplicate index covariate '" + name + "'");
      xc.push_back(c);
    }
  } else {
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(t.names.size()); ++c)
      if (c != yc && std::find(zc.begin(), zc.end(), c) == zc.end()) xc.push_back(c);
  }

  loaded_dataset out;
  out.y_name = t.names[yc];
  out.data.y = t.values.col(yc);
  out.data.x.resize(t.values.rows(), xc.size());
  out.data.z.resize(t.values.rows(), zc.size());
  for (std::size_t k = 0; k < xc.size(); ++k) {
    out.data.x.col(k) = t.values.col(xc[k]);
    out.x_names.push_back(t.names[xc[k]]);
  }
  for (std::size_t k = 0; k < zc.size(); ++k) {
    out.data.z.col(k) = t.values.col(zc[k]);
    out.z_names.push_back(t.names[zc[k]]);
  }
  // A z-less load is allowed for screening/partition workflows; model fitting
  // revalidates and rejects q = 0 at its own boundary.
  if (!zc.empty()) {
    out.data.validate();
  } else {
    if (out.data.n() < 2 || out.data.p() < 2)
      fail_invalid(error_code::dimension_mismatch, "need n >= 2 rows and p >= 2 covariates");
    if (!out.data.y.allFinite() || !out.data.x.allFinite())
      fail_invalid(error_code::nonfinite_input, "non-finite values in input");
  }

  out.x_mean = Eigen::VectorXd::Zero(out.data.p());
  out.x_scale = Eigen::VectorXd::Ones(out.data.p());
  out.z_mean = Eigen::VectorXd::Zero(out.data.q());
  out.z_scale = Eigen::VectorXd::Ones(out.data.q());
  if (standardize) {
    standardizer sx = column_stats(out.data.x, out.x_names);
    standardizer sz = column_stats(out.data.z, out.z_names);
    Eigen::MatrixXd ym = out.data.y;
    standardizer sy = column_stats(ym, {out.y_name});
    apply_standardize(out.data.x, sx);
    apply_standardize(out.data.z, sz);
    out.data.y = ((out.data.y.array() - sy.mean(0)) / sy.scale(0)).matrix();
    out.x_mean = sx.mean;
    out.x_scale = sx.scale;
    out.z_mean = sz.mean;
    out.z_scale = sz.scale;
    out.y_mean = sy.mean(0);
    out.y_scale = sy.scale(0);
    out.standardized = true;
  }
  return out;
}

loaded_dataset standardize_dataset(const dataset& d, bool standardize) {
  d.validate();
  loaded_dataset out;
  out.data = d;
  out.y_name = "y";
  for (Eigen::Index j = 0; j < d.p(); ++j) out.x_names.push_back("x" + std::to_string(j + 1));
  for (Eigen::Index j = 0; j < d.q(); ++j) out.z_names.push_back("z" + std::to_string(j + 1));
  out.x_mean = Eigen::VectorXd::Zero(d.p());
  out.x_scale = Eigen::VectorXd::Ones(d.p());
  out.z_mean = Eigen::VectorXd::Zero(d.q());
  out.z_scale = Eigen::VectorXd::Ones(d.q());
  if (standardize) {
    standardizer sx = column_stats(out.data.x, out.x_names);
    standardizer sz = column_stats(out.data.z, out.z_names);
    Eigen::MatrixXd ym = out.data.y;
    standardizer sy = column_stats(ym, {out.y_name});
    apply_standardize(out.data.x, sx);
    apply_standardize(out.data.z, sz);
    out.data.y = ((out.data.y.array() - sy.mean(0)) / sy.scale(0)).matrix();
    out.x_mean = sx.mean;
    out.x_scale = sx.scale;
    out.z_mean = sz.mean;
    out.z_scale = sz.scale;
    out.y_mean = sy.mean(0);
    out.y_scale = sy.scale(0);
    out.standardized = true;
  }
  return out;
}

namespace {

// Screening and partitioning run before any linear block is designated, so
// they accept q = 0 datasets that the model-fitting validation would reject.
void validate_yx(const dataset& data) {
  if (data.n() < 2 || data.p() < 2 || data.x.rows() != data.n() ||
      data.z.rows() != data.n())
    fail_invalid(error_code::dimension_mismatch, "need n >= 2 rows and p >= 2 covariates");
  if (!data.y.allFinite() || !data.x.allFinite())
    fail_invalid(error_code::nonfinite_input, "non-finite values in input");
}

Eigen::VectorXd correlation_scores(const dataset& data) {
  const Eigen::Index n = data.n();
  Eigen::VectorXd y = (data.y.array() - data.y.mean()).matrix();
  double sy = y.norm();
  Eigen::VectorXd score(data.p());
  for (Eigen::Index j = 0; j < data.p(); ++j) {
    Eigen::VectorXd xj = (data.x.col(j).array() - data.x.col(j).mean()).matrix();
    double sx = xj.norm();
    score(j) = (sx > 0.0 && sy > 0.0 && n > 1) ? std::abs(y.dot(xj) / (sx * sy)) : 0.0;
  }
  return score;
}

}  // namespace

std::vector<Eigen::Index> screen_features(const dataset& data, Eigen::Index keep,
                                          Eigen::VectorXd* scores) {
  validate_yx(data);
  if (keep < 1 || keep > data.p())
    fail_invalid(error_code::invalid_option, "keep must lie in [1, p]");
  Eigen::VectorXd score = correlation_scores(data);
  if (scores) *scores = score;

  std::vector<Eigen::Index> order(data.p());
  for (Eigen::Index j = 0; j < data.p(); ++j) order[j] = j;
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (score(a) != score(b)) return score(a) > score(b);
    return a < b;
  });
  order.resize(keep);
  std::sort(order.begin(), order.end());
  return order;
}

partition_result partition_variables(const dataset& data, const partition_options& opt) {
  validate_yx(data);
  if (!(opt.corr_threshold >= 0.0) || !(opt.band_k > 0.0) || opt.grid_points < 2)
    fail_invalid(error_code::invalid_option, "bad partition options");
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.p();

  partition_result res;
  res.score = correlation_scores(data);
  res.max_violation = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
  std::vector<int> verdict(p, 0);  // 0 index, 1 linear
  std::vector<std::string> flag_slot(p);

  parallel_for(
      static_cast<std::size_t>(p),
      [&](std::size_t ju) {
        Eigen::Index j = static_cast<Eigen::Index>(ju);
        if (res.score(j) <= opt.corr_threshold) return;  // stays an index variable

        Eigen::VectorXd xj = data.x.col(j);
        double sd = std::sqrt((xj.array() - xj.mean()).square().sum() / n);
        double h = opt.h > 0.0 ? opt.h
                               : 1.06 * sd * std::pow(static_cast<double>(n), -0.2);
        kernel_spec kern{kernel_family::gaussian, h};

        std::vector<double> sorted(xj.data(), xj.data() + n);
        std::sort(sorted.begin(), sorted.end());
        auto quantile = [&](double prob) {
          double pos = prob * (n - 1);
          std::size_t lo = static_cast<std::size_t>(pos);
          std::size_t hi = std::min(lo + 1, static_cast<std::size_t>(n - 1));
          double w = pos - lo;
          return (1.0 - w) * sorted[lo] + w * sorted[hi];
        };
        double lo = quantile(0.025), hi = quantile(0.975);

        try {
          // Leave-one-out residuals of the smooth of y on x_j.
          Eigen::VectorXd e2(n);
          for (Eigen::Index i = 0; i < n; ++i) {
            double a0 = 0, a1 = 0, a2 = 0, b0 = 0, b1 = 0;
            for (Eigen::Index k = 0; k < n; ++k) {
              if (k == i) continue;
              double u = xj(k) - xj(i);
              double kv = kern.kh(u);
              a0 += kv;
              a1 += kv * u;
              a2 += kv * u * u;
              b0 += kv * data.y(k);
              b1 += kv * u * data.y(k);
            }
            double disc = a0 * a2 - a1 * a1;
            if (!(a0 > 0.0) || !(disc / (a0 * a0) > 1e-14))
              fail_numeric(error_code::singular_local_fit, "band smoother singular");
            double d = data.y(i) - (a2 * b0 - a1 * b1) / disc;
            e2(i) = d * d;
          }

          // Straight line by least squares.
          double mx = xj.mean(), my = data.y.mean();
          double sxx = (xj.array() - mx).square().sum();
          double slope = (xj.array() - mx).matrix().dot(data.y) / sxx;
          double intercept = my - slope * mx;

          double worst = -std::numeric_limits<double>::infinity();
          for (int k = 0; k < opt.grid_points; ++k) {
            double t = lo + (k + 1) * (hi - lo) / (opt.grid_points + 1);
            double m_hat = local_linear_at(t, xj, data.y, kern).value;
            double v_hat = std::max(local_linear_at(t, xj, e2, kern).value, 1e-8);
            double band = opt.band_k * std::sqrt(v_hat);
            double line = intercept + slope * t;
            worst = std::max(worst, std::abs(line - m_hat) - band);
          }
          res.max_violation(j) = worst;
          verdict[j] = worst <= 0.0 ? 1 : 0;
        } catch (const error& e) {
          if (e.code() != error_code::singular_local_fit) throw;
          flag_slot[j] = "band_singular_x" + std::to_string(j + 1);
          verdict[j] = 0;
        }
      },
      opt.threads);

  for (Eigen::Index j = 0; j < p; ++j) {
    if (!flag_slot[j].empty()) res.flags.push_back(flag_slot[j]);
    if (verdict[j] == 1)
      res.linear_vars.push_back(j);
    else
      res.index_vars.push_back(j);
  }
  return res;
}

void write_fit_json(const fit_result& fit, const dataset& data, const kernel_spec& kern,
                    const penalty_spec& pen, const loaded_dataset* meta,
                    const std::string& path) {
  ordered_json j;
  j["model"] = {{"n", data.n()}, {"p", data.p()}, {"q", data.q()}};
  j["kernel"] = {{"family", kern.family == kernel_family::gaussian ? "gaussian" : "epanechnikov"},
                 {"h", fit.h}};
  j["penalty"] = {{"family", pen.family == penalty_family::scad ? "scad" : "l1"},
                  {"lambda", fit.lambda},
                  {"a", pen.a}};
  ordered_json coef;
  coef["beta"] = json_vector(fit.est.beta);
  coef["alpha"] = json_vector(fit.est.index.full_alpha());
  coef["alpha_free"] = json_vector(fit.est.index.alpha_free);
  ordered_json act = ordered_json::array();
  for (Eigen::Index a : fit.active) act.push_back(a);
  coef["active_set"] = act;
  j["coefficients"] = coef;
  j["fit"] = {{"rss", fit.rss},
              {"converged", fit.converged},
              {"iterations", fit.iterations},
              {"objective_trace", fit.objective_trace},
              {"flags", fit.flags}};
  if (meta) {
    j["columns"] = {{"response", meta->y_name},
                    {"linear", meta->z_names},
                    {"index", meta->x_names}};
    j["standardization"] = {{"applied", meta->standardized},
                            {"y_mean", meta->y_mean},
                            {"y_scale", meta->y_scale},
                            {"x_mean", json_vector(meta->x_mean)},
                            {"x_scale", json_vector(meta->x_scale)},
                            {"z_mean", json_vector(meta->z_mean)},
                            {"z_scale", json_vector(meta->z_scale)}};
  }
  std::ofstream out = open_out(path);
  out << j.dump(2) << "\n";
  if (!out) fail_io("failed writing '" + path + "'");
}

void write_curve_csv(const fit_result& fit, const dataset& data, const std::string& path) {
  if (fit.gamma.size() != data.n())
    fail_invalid(error_code::dimension_mismatch, "fit profile does not match dataset");
  Eigen::VectorXd partial = data.y - data.z * fit.est.beta;
  std::ofstream out = open_out(path);
  out << "index_value,partial_residual,eta_hat\n";
  for (Eigen::Index i = 0; i < data.n(); ++i)
    out << format_double(fit.gamma(i)) << ',' << format_double(partial(i)) << ','
        << format_double(fit.eta(i)) << '\n';
  if (!out) fail_io("failed writing '" + path + "'");
}

void write_tests_json(const beta_test_result* bt, const eta_test_result* et,
                      const std::string& path) {
  ordered_json j;
  if (bt) {
    j["beta_test"] = {{"t_n", bt->t_n},       {"df", bt->df},
                      {"p_value", bt->p_value}, {"rss0", bt->rss0},
                      {"rss1", bt->rss1},     {"lambda_alt", bt->fit_alt.lambda},
                      {"lambda_null", bt->fit_null.lambda}, {"flags", bt->flags}};
  } else {
    j["beta_test"] = nullptr;
  }
  if (et) {
    j["eta_test"] = {{"s_n", et->s_n},
                     {"sigma_s2", et->sigma_s2},
                     {"v_n", et->v_n},
                     {"v_n_sq", et->v_n_sq},
                     {"p_value", et->p_value},
                     {"b", et->b},
                     {"zeta", json_vector(et->zeta)},
                     {"flags", et->flags}};
  } else {
    j["eta_test"] = nullptr;
  }
  std::ofstream out = open_out(path);
  out << j.dump(2) << "\n";
  if (!out) fail_io("failed writing '" + path + "'");
}

void write_summary_csv(const summary_table& table, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "model,pipeline,n,p,signal,reps,failures,descent_violations,tpr,fpr,"
         "bias_b1,mse_b1,bias_b2,mse_b2,bias_a1,mse_a1,bias_a2,mse_a2,bias_a3,mse_a3,"
         "reject_rate,reject_se,mean_stat\n";
  for (const summary_row& r : table.rows) {
    std::string line = r.model + ',' + r.pipeline + ',' + std::to_string(r.n) + ',' +
                       std::to_string(r.p) + ',' + format_double(r.signal) + ',' +
                       std::to_string(r.reps) + ',' + std::to_string(r.failures) + ',' +
                       std::to_string(r.descent_violations);
    csv_cell(line, r.tpr);
    csv_cell(line, r.fpr);
    for (std::size_t k = 0; k < 2; ++k) {
      csv_cell(line, nth(r.bias_beta, k));
      csv_cell(line, nth(r.mse_beta, k));
    }
    for (std::size_t k = 0; k < 3; ++k) {
      csv_cell(line, nth(r.bias_alpha, k));
      csv_cell(line, nth(r.mse_alpha, k));
    }
    csv_cell(line, r.reject_rate);
    csv_cell(line, r.reject_se);
    csv_cell(line, r.mean_stat);
    out << line << '\n';
  }
  if (!out) fail_io("failed writing '" + path + "'");
}

void write_summary_json(const summary_table& table, const std::string& path) {
  ordered_json j;
  j["seed"] = table.seed;
  j["level"] = table.level;
  j["h"] = table.h;
  ordered_json rows = ordered_json::array();
  for (const summary_row& r : table.rows) {
    ordered_json row;
    row["model"] = r.model;
    row["pipeline"] = r.pipeline;
    row["n"] = r.n;
    row["p"] = r.p;
    row["signal"] = r.signal;
    row["reps"] = r.reps;
    row["failures"] = r.failures;
    row["descent_violations"] = r.descent_violations;
    row["tpr"] = json_optional(r.tpr);
    row["fpr"] = json_optional(r.fpr);
    ordered_json bb = ordered_json::array(), mb = ordered_json::array(),
                 ba = ordered_json::array(), ma = ordered_json::array();
    for (const auto& v : r.bias_beta) bb.push_back(json_optional(v));
    for (const auto& v : r.mse_beta) mb.push_back(json_optional(v));
    for (const auto& v : r.bias_alpha) ba.push_back(json_optional(v));
    for (const auto& v : r.mse_alpha) ma.push_back(json_optional(v));
    row["bias_beta"] = bb;
    row["mse_beta"] = mb;
    row["bias_alpha"] = ba;
    row["mse_alpha"] = ma;
    row["reject_rate"] = json_optional(r.reject_rate);
    row["reject_se"] = json_optional(r.reject_se);
    row["mean_stat"] = json_optional(r.mean_stat);
    rows.push_back(row);
  }
  j["rows"] = rows;
  std::ofstream out = open_out(path);
  out << j.dump(2) << "\n";
  if (!out) fail_io("failed writing '" + path + "'");
}

void write_partition_json(const partition_result& part, const std::vector<std::string>& names,
                          const std::string& path) {
  auto name_of = [&](Eigen::Index j) {
    return j < static_cast<Eigen::Index>(names.size()) ? names[j]
                                                       : "x" + std::to_string(j + 1);
  };
  ordered_json j;
  ordered_json lin = ordered_json::array(), idx = ordered_json::array();
  for (Eigen::Index v : part.linear_vars) lin.push_back(name_of(v));
  for (Eigen::Index v : part.index_vars) idx.push_back(name_of(v));
  j["linear"] = lin;
  j["index"] = idx;
  j["scores"] = json_vector(part.score);
  ordered_json mv = ordered_json::array();
  for (Eigen::Index k = 0; k < part.max_violation.size(); ++k) {
    double v = part.max_violation(k);
    if (std::isnan(v))
      mv.push_back(nullptr);
    else
      mv.push_back(v);
  }
  j["max_violation"] = mv;
  j["flags"] = part.flags;
  std::ofstream out = open_out(path);
  out << j.dump(2) << "\n";
  if (!out) fail_io("failed writing '" + path + "'");
}

}  // namespace plsim
