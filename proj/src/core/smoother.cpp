#include "core/smoother.hpp"

#include <cmath>
#include <string>

namespace plsim {

namespace {

constexpr double kVarFloor = 1e-14;

struct moments {
  double a0 = 0, a1 = 0, a2 = 0, b0 = 0, b1 = 0;

  double disc() const { return a0 * a2 - a1 * a1; }
  bool singular() const { return !(a0 > 0.0) || !(disc() / (a0 * a0) > kVarFloor); }
  double value() const { return (a2 * b0 - a1 * b1) / disc(); }
  double slope() const { return (a0 * b1 - a1 * b0) / disc(); }
};

moments accumulate(double t, const Eigen::VectorXd& g, const Eigen::VectorXd& r,
                   const kernel_spec& kern, Eigen::Index skip) {
  moments m;
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    if (j == skip) continue;
    double u = g(j) - t;
    double k = kern.kh(u);
    if (k == 0.0) continue;
    m.a0 += k;
    m.a1 += k * u;
    m.a2 += k * u * u;
    m.b0 += k * r(j);
    m.b1 += k * u * r(j);
  }
  return m;
}

[[noreturn]] void fail_singular(double t, Eigen::Index i) {
  std::string where = i >= 0 ? "sample point i=" + std::to_string(i)
                             : "t=" + std::to_string(t);
  fail_numeric(error_code::singular_local_fit,
               "local linear fit is singular at " + where);
}

}  // namespace

local_fit local_linear_at(double t, const Eigen::VectorXd& index_values,
                          const Eigen::VectorXd& responses, const kernel_spec& kern) {
  kern.validate();
  if (index_values.size() != responses.size())
    fail_invalid(error_code::dimension_mismatch, "index/response lengths differ");
  moments m = accumulate(t, index_values, responses, kern, -1);
  if (m.singular()) fail_singular(t, -1);
  return {m.value(), m.slope()};
}

Eigen::VectorXd local_linear_weights(double t, const Eigen::VectorXd& index_values,
                                     const kernel_spec& kern) {
  kern.validate();
  const Eigen::VectorXd& g = index_values;
  moments m = accumulate(t, g, Eigen::VectorXd::Zero(g.size()), kern, -1);
  if (m.singular()) fail_singular(t, -1);
  Eigen::VectorXd w(g.size());
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    double u = g(j) - t;
    w(j) = kern.kh(u) * (m.a2 - u * m.a1);
  }
  return w / m.disc();
}

profile_fit profile_eta(const dataset& data, const theta& th, const kernel_spec& kern) {
  kern.validate();
  data.validate();
  if (th.index.p() != data.p() || th.beta.size() != data.q())
    fail_invalid(error_code::dimension_mismatch, "theta does not match dataset");

  profile_fit pf;
  pf.gamma = data.x * th.index.full_alpha();
  pf.resid_y = data.y - data.z * th.beta;
  Eigen::Index n = data.n();
  pf.eta.resize(n);
  pf.slope.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    moments m = accumulate(pf.gamma(i), pf.gamma, pf.resid_y, kern, i);
    if (m.singular()) fail_singular(pf.gamma(i), i);
    pf.eta(i) = m.value();
    pf.slope(i) = m.slope();
  }
  return pf;
}

double predict_eta(const profile_fit& pf, double t, const kernel_spec& kern) {
  return local_linear_at(t, pf.gamma, pf.resid_y, kern).value;
}

active_set all_free_coordinates(Eigen::Index p) {
  active_set act(p - 1);
  for (Eigen::Index j = 0; j + 1 < p; ++j) act[j] = j;
  return act;
}

Eigen::MatrixXd profile_eta_gradient(const dataset& data, const theta& th,
                                     const active_set& act, const kernel_spec& kern) {
  kern.validate();
  data.validate();
  check_active(act, data.p() - 1);
  if (th.index.p() != data.p() || th.beta.size() != data.q())
    fail_invalid(error_code::dimension_mismatch, "theta does not match dataset");

  const Eigen::Index n = data.n();
  const Eigen::Index q = data.q();
  const Eigen::Index s = static_cast<Eigen::Index>(act.size());
  const double a1 = th.index.alpha1();

  // Columns of x entering the restricted index block: x_1 plus the active ones.
  Eigen::MatrixXd xs(n, s + 1);
  Eigen::VectorXd a_act(s);
  xs.col(0) = data.x.col(0);
  for (Eigen::Index k = 0; k < s; ++k) {
    xs.col(k + 1) = data.x.col(act[k] + 1);
    a_act(k) = th.index.alpha_free(act[k]);
  }

  Eigen::VectorXd gamma = data.x * th.index.full_alpha();
  Eigen::VectorXd r = data.y - data.z * th.beta;

  Eigen::MatrixXd grad(n, q + s);
  Eigen::VectorXd kv(n), du(n), uv(n);

  for (Eigen::Index i = 0; i < n; ++i) {
    double t = gamma(i);
    moments m;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) {
        kv(j) = du(j) = uv(j) = 0.0;
        continue;
      }
      double u = gamma(j) - t;
      double k = kern.kh(u);
      double dk = kern.dkh(u);
      kv(j) = k;
      du(j) = dk;
      uv(j) = u;
      m.a0 += k;
      m.a1 += k * u;
      m.a2 += k * u * u;
      m.b0 += k * r(j);
      m.b1 += k * u * r(j);
    }
    if (m.singular()) fail_singular(t, i);
    double disc = m.disc();
    double eta = m.value();

    // d eta_i / d beta = -sum_j W_ij z_j with the usual local-linear weights.
    Eigen::VectorXd wy = (kv.array() * (m.a2 - uv.array() * m.a1)).matrix() / disc;
    grad.row(i).head(q) = -(wy.transpose() * data.z);

    if (s > 0) {
      // Chain rule through the kernel weights: each moment has derivative
      // sum_j c_j * J' (x_j - x_i) for the per-observation coefficients below.
      Eigen::ArrayXd p1 = du.array() * uv.array() + kv.array();          // dA1, dB1/r
      Eigen::ArrayXd p2 = du.array() * uv.array().square() + 2.0 * kv.array() * uv.array();  // dA2
      Eigen::ArrayXd cn = p2 * m.b0 + m.a2 * du.array() * r.array() -
                          p1 * m.b1 - m.a1 * p1 * r.array();
      Eigen::ArrayXd cd = du.array() * m.a2 + m.a0 * p2 - 2.0 * m.a1 * p1;
      Eigen::VectorXd w = ((cn - eta * cd) / disc).matrix();

      Eigen::VectorXd msum = xs.transpose() * w - w.sum() * xs.row(i).transpose();
      grad.row(i).tail(s) =
          (msum.tail(s) - a_act * (msum(0) / a1)).transpose();
    }
  }

  if (!grad.allFinite())
    fail_numeric(error_code::gradient_overflow, "profile gradient has non-finite entries");
  return grad;
}

double select_bandwidth_cv(const dataset& data, const theta& th,
                           const std::vector<double>& grid, int folds,
                           kernel_family family) {
  data.validate();
  if (grid.empty()) fail_invalid(error_code::invalid_option, "bandwidth grid is empty");
  if (folds < 2 || folds > data.n())
    fail_invalid(error_code::invalid_option, "need 2 <= folds <= n");

  Eigen::VectorXd gamma = data.x * th.index.full_alpha();
  Eigen::VectorXd r = data.y - data.z * th.beta;
  Eigen::Index n = data.n();

  std::vector<Eigen::VectorXd> train_g(folds), train_r(folds);
  for (int f = 0; f < folds; ++f) {
    Eigen::Index m = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (i % folds != f) ++m;
    train_g[f].resize(m);
    train_r[f].resize(m);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i % folds == f) continue;
      train_g[f](k) = gamma(i);
      train_r[f](k) = r(i);
      ++k;
    }
  }

  double best_h = 0.0, best_err = 0.0;
  bool have_best = false;
  for (double h : grid) {
    kernel_spec kern{family, h};
    kern.validate();
    double err = 0.0;
    bool failed = false;
    for (Eigen::Index i = 0; i < n && !failed; ++i) {
      int f = static_cast<int>(i % folds);
      try {
        double pred = local_linear_at(gamma(i), train_g[f], train_r[f], kern).value;
        double d = r(i) - pred;
        err += d * d;
      } catch (const error& e) {
        if (e.code() == error_code::singular_local_fit)
          failed = true;
        else
          throw;
      }
    }
    if (failed) continue;
    if (!have_best || err < best_err || (err == best_err && h > best_h)) {
      have_best = true;
      best_err = err;
      best_h = h;
    }
  }
  if (!have_best)
    fail_numeric(error_code::all_folds_singular,
                 "every bandwidth in the grid produced a singular fold fit");
  return best_h;
}

}  // namespace plsim
