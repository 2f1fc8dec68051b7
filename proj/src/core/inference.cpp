#include "core/inference.hpp"

#include <cmath>

#include "core/parallel.hpp"

namespace plsim {

beta_test_result test_beta(const dataset& data, const kernel_spec& kern, const penalty_spec& pen,
                           const optim_config& cfg, bool oracle, const active_set* truth) {
  data.validate();
  const Eigen::Index n = data.n();
  const Eigen::Index q = data.q();
  if (n <= q)
    fail_invalid(error_code::dimension_mismatch, "test requires n > q");

  beta_test_result res;
  res.df = static_cast<int>(q);
  if (oracle) {
    if (!truth) fail_invalid(error_code::invalid_option, "oracle test needs the true support");
    res.fit_alt = fit_restricted(data, kern, *truth, cfg, true);
    res.fit_null = fit_restricted(data, kern, *truth, cfg, false);
  } else if (pen.lambda > 0.0) {
    res.fit_alt = fit_plsim(data, kern, pen, cfg);
    res.fit_null = fit_constrained(data, kern, pen, cfg);
  } else {
    res.fit_alt = select_lambda(data, kern, pen, cfg, false).fit;
    res.fit_null = select_lambda(data, kern, pen, cfg, true).fit;
  }

  res.rss1 = res.fit_alt.rss;
  res.rss0 = res.fit_null.rss;
  if (!(res.rss1 > 0.0)) {
    res.flags.push_back("degenerate_rss");
    res.t_n = 0.0;
    res.p_value = 1.0;
    return res;
  }
  res.t_n = (res.rss0 - res.rss1) / (res.rss1 / static_cast<double>(n - q));
  if (res.t_n <= 0.0) {
    res.flags.push_back("nonpositive_numerator");
    res.p_value = 1.0;
  } else {
    res.p_value = chisq_sf(res.t_n, res.df);
  }
  return res;
}

namespace {

// Leave-one-out local linear smooth of each column of `m` on `g`.
Eigen::MatrixXd loo_smooth_columns(const Eigen::VectorXd& g, const Eigen::MatrixXd& m,
                                   const kernel_spec& kern) {
  const Eigen::Index n = g.size();
  Eigen::MatrixXd out(n, m.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    double a0 = 0, a1 = 0, a2 = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      double u = g(j) - g(i);
      double k = kern.kh(u);
      a0 += k;
      a1 += k * u;
      a2 += k * u * u;
    }
    double disc = a0 * a2 - a1 * a1;
    if (!(a0 > 0.0) || !(disc / (a0 * a0) > 1e-14))
      fail_numeric(error_code::singular_local_fit,
                   "conditional mean smoother singular at i=" + std::to_string(i));
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      double b0 = 0, b1 = 0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        double u = g(j) - g(i);
        double k = kern.kh(u);
        b0 += k * m(j, c);
        b1 += k * u * m(j, c);
      }
      out(i, c) = (a2 * b0 - a1 * b1) / disc;
    }
  }
  return out;
}

}  // namespace

sigma_star_result estimate_sigma_star(const dataset& data, const fit_result& fit,
                                      const kernel_spec& kern) {
  data.validate();
  kern.validate();
  const Eigen::Index n = data.n();
  const Eigen::Index q = data.q();
  const Eigen::Index s = static_cast<Eigen::Index>(fit.active.size());
  if (fit.gamma.size() != n || fit.slope.size() != n)
    fail_invalid(error_code::dimension_mismatch, "fit profile does not match dataset");

  // Centered linear block: z - E[z | index].
  Eigen::MatrixXd z_tilde = data.z - loo_smooth_columns(fit.gamma, data.z, kern);

  // Centered restricted index block, scaled by the link slope.
  Eigen::MatrixXd l(n, q + s);
  l.leftCols(q) = z_tilde;
  if (s > 0) {
    Eigen::MatrixXd xs(n, s + 1);
    xs.col(0) = data.x.col(0);
    for (Eigen::Index k = 0; k < s; ++k) xs.col(k + 1) = data.x.col(fit.active[k] + 1);
    Eigen::MatrixXd x_tilde = xs - loo_smooth_columns(fit.gamma, xs, kern);
    Eigen::MatrixXd jr = jacobian_restricted(fit.est.index, fit.active);
    l.rightCols(s) = ((x_tilde * jr).array().colwise() * fit.slope.array()).matrix();
  }

  sigma_star_result res;
  res.sigma_star = l.transpose() * l / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(res.sigma_star);
  double emin = es.eigenvalues().minCoeff();
  double emax = es.eigenvalues().maxCoeff();
  if (!(emin > 0.0) || emin <= 1e-12 * emax)
    fail_numeric(error_code::singular_sigma, "Sigma* estimate is numerically singular");
  res.cond = emax / emin;

  Eigen::MatrixXd inv = res.sigma_star.ldlt().solve(Eigen::MatrixXd::Identity(q + s, q + s));
  res.phi = inv.topLeftCorner(q, q);
  return res;
}

double theoretical_power(const Eigen::MatrixXd& phi, const Eigen::VectorXd& delta,
                         Eigen::Index n, double sigma2, double level) {
  if (!(level > 0.0 && level < 1.0))
    fail_invalid(error_code::invalid_level, "level must lie in (0, 1)");
  if (!(sigma2 > 0.0)) fail_invalid(error_code::invalid_option, "sigma2 must be > 0");
  if (phi.rows() != phi.cols() || phi.rows() != delta.size())
    fail_invalid(error_code::dimension_mismatch, "phi/delta shapes disagree");
  const int q = static_cast<int>(delta.size());
  if (delta.isZero(0.0)) return level;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(phi);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    fail_numeric(error_code::singular_sigma, "phi must be positive definite");
  double ncp = static_cast<double>(n) * delta.dot(ldlt.solve(delta)) / sigma2;
  double crit = chisq_quantile(1.0 - level, q);
  return noncentral_chisq_sf(crit, q, ncp);
}

double null_link_spec::eval(double t, const Eigen::VectorXd& zeta) const {
  switch (family) {
    case link_family::constant:
      return zeta(0);
    case link_family::linear:
      return zeta(0) * t;
    case link_family::custom:
      return g(t, zeta);
  }
  return 0.0;
}

Eigen::VectorXd fit_null_link(const Eigen::VectorXd& t, const Eigen::VectorXd& u,
                              const null_link_spec& link) {
  if (t.size() != u.size())
    fail_invalid(error_code::dimension_mismatch, "index/residual lengths differ");
  const Eigen::Index n = t.size();
  if (n < 2) fail_invalid(error_code::dimension_mismatch, "need n >= 2 for the null link");

  if (link.family == link_family::constant) {
    Eigen::VectorXd z(1);
    z(0) = u.mean();
    return z;
  }
  if (link.family == link_family::linear) {
    double denom = t.squaredNorm();
    if (!(denom > 0.0))
      fail_numeric(error_code::zero_variance, "index values are all zero");
    Eigen::VectorXd z(1);
    z(0) = t.dot(u) / denom;
    return z;
  }

  if (!link.g || !link.dg || link.dim < 1)
    fail_invalid(error_code::invalid_option, "custom link needs g, dg and dim");
  Eigen::VectorXd zeta =
      link.zeta_init.size() == link.dim ? link.zeta_init : Eigen::VectorXd::Zero(link.dim);

  auto sse = [&](const Eigen::VectorXd& zt) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double d = u(i) - link.g(t(i), zt);
      s += d * d;
    }
    return s;
  };

  double cur = sse(zeta);
  for (int it = 0; it < 200; ++it) {
    Eigen::MatrixXd jac(n, link.dim);
    Eigen::VectorXd resid(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      resid(i) = u(i) - link.g(t(i), zeta);
      jac.row(i) = link.dg(t(i), zeta).transpose();
    }
    Eigen::VectorXd step =
        (jac.transpose() * jac).ldlt().solve(jac.transpose() * resid);
    if (!step.allFinite())
      fail_numeric(error_code::gn_diverged, "Gauss-Newton step is non-finite");

    double scale = 1.0;
    Eigen::VectorXd next = zeta + step;
    double nxt = sse(next);
    int halvings = 0;
    while (nxt > cur && halvings < 30) {
      scale *= 0.5;
      next = zeta + scale * step;
      nxt = sse(next);
      ++halvings;
    }
    if (nxt > cur)
      fail_numeric(error_code::gn_diverged, "Gauss-Newton failed to descend");
    double move = (next - zeta).norm();
    zeta = next;
    cur = nxt;
    if (move <= 1e-8 * (1.0 + zeta.norm())) return zeta;
  }
  fail_numeric(error_code::gn_diverged, "Gauss-Newton did not converge in 200 iterations");
}

namespace {

double g_kernel(double u, kernel_family fam) {
  kernel_spec k{fam, 1.0};
  return k.k(u);
}

// Per-row partial sums accumulated in index order keep the result independent
// of the thread count.
double u_stat_sum(const Eigen::VectorXd& a, const Eigen::VectorXd& gamma, double b,
                  kernel_family fam, bool squared, int threads) {
  const Eigen::Index n = gamma.size();
  Eigen::VectorXd partial = Eigen::VectorXd::Zero(n);
  parallel_for(
      static_cast<std::size_t>(n),
      [&](std::size_t i) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
          if (static_cast<Eigen::Index>(i) == j) continue;
          double g = g_kernel((gamma(i) - gamma(j)) / b, fam);
          acc += (squared ? g * g : g) * a(j);
        }
        partial(i) = acc * a(i);
      },
      threads);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) total += partial(i);
  return total / b / (static_cast<double>(n) * (n - 1));
}

}  // namespace

double u_stat_s_n(const Eigen::VectorXd& eps, const Eigen::VectorXd& gamma, double b,
                  kernel_family fam, int threads) {
  if (eps.size() != gamma.size())
    fail_invalid(error_code::dimension_mismatch, "residual/index lengths differ");
  if (!(b > 0.0)) fail_invalid(error_code::invalid_bandwidth, "b must be > 0");
  return u_stat_sum(eps, gamma, b, fam, false, threads);
}

double u_stat_sigma2(const Eigen::VectorXd& eps, const Eigen::VectorXd& gamma, double b,
                     kernel_family fam, int threads) {
  if (eps.size() != gamma.size())
    fail_invalid(error_code::dimension_mismatch, "residual/index lengths differ");
  if (!(b > 0.0)) fail_invalid(error_code::invalid_bandwidth, "b must be > 0");
  return 2.0 * u_stat_sum(eps.cwiseAbs2(), gamma, b, fam, true, threads);
}

eta_test_result test_eta(const dataset& data, const fit_result& fit, const null_link_spec& link,
                         kernel_family g_family, double b) {
  data.validate();
  const Eigen::Index n = data.n();
  if (n < 3) fail_invalid(error_code::dimension_mismatch, "need n >= 3");
  if (fit.gamma.size() != n)
    fail_invalid(error_code::dimension_mismatch, "fit profile does not match dataset");

  eta_test_result res;
  Eigen::VectorXd u = data.y - data.z * fit.est.beta;
  res.zeta = fit_null_link(fit.gamma, u, link);
  Eigen::VectorXd eps(n);
  for (Eigen::Index i = 0; i < n; ++i) eps(i) = u(i) - link.eval(fit.gamma(i), res.zeta);

  if (b > 0.0) {
    res.b = b;
  } else {
    double mean = fit.gamma.mean();
    double sd = std::sqrt((fit.gamma.array() - mean).square().sum() / n);
    if (!(sd > 0.0)) fail_numeric(error_code::zero_variance, "index values are constant");
    res.b = sd * std::pow(static_cast<double>(n), -0.4);
  }

  res.s_n = u_stat_s_n(eps, fit.gamma, res.b, g_family);
  res.sigma_s2 = u_stat_sigma2(eps, fit.gamma, res.b, g_family);
  if (!(res.sigma_s2 > 0.0))
    fail_numeric(error_code::zero_variance, "variance estimate of the U-statistic is zero");

  res.v_n = std::sqrt(static_cast<double>(n - 1) / n) * n * std::sqrt(res.b) * res.s_n /
            std::sqrt(res.sigma_s2);
  res.v_n_sq = res.v_n * res.v_n;
  res.p_value = chisq_sf(res.v_n_sq, 1);
  return res;
}

}  // namespace plsim
