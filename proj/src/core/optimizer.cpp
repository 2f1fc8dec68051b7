#include "core/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "core/parallel.hpp"

namespace plsim {

namespace {

constexpr double kAlphaBound = 1.0 - 1e-8;

double soft_threshold(double g, double w) {
  if (g > w) return g - w;
  if (g < -w) return -(-g - w);
  return 0.0;
}

// Gathers the coordinates of alpha_free listed in `act`.
Eigen::VectorXd gather(const Eigen::VectorXd& v, const active_set& act) {
  Eigen::VectorXd out(act.size());
  for (std::size_t k = 0; k < act.size(); ++k) out(k) = v(act[k]);
  return out;
}

// Keeps |alpha_free| strictly inside the unit ball; scaling preserves zeros.
void project_alpha(Eigen::VectorXd& af) {
  double nrm = af.norm();
  if (nrm >= kAlphaBound) af *= kAlphaBound / nrm;
}

linearized_problem build_linearized(const dataset& data, const theta& th,
                                    const kernel_spec& kern, const active_set& act,
                                    bool include_beta, const profile_fit& pf) {
  const Eigen::Index n = data.n();
  const Eigen::Index q = data.q();
  const Eigen::Index s = static_cast<Eigen::Index>(act.size());
  Eigen::MatrixXd grad = profile_eta_gradient(data, th, act, kern);

  linearized_problem prob;
  prob.n_alpha = s;
  prob.n_beta = include_beta ? q : 0;
  prob.z_star.resize(n, s + prob.n_beta);
  prob.z_star.leftCols(s) = grad.rightCols(s);
  if (include_beta) prob.z_star.rightCols(q) = data.z + grad.leftCols(q);

  prob.y_star = data.y - pf.eta + grad.rightCols(s) * gather(th.index.alpha_free, act);
  if (include_beta) prob.y_star += grad.leftCols(q) * th.beta;
  return prob;
}

struct engine_opts {
  bool include_beta = true;
  bool penalized = true;
  const active_set* allowed = nullptr;  // null: all free coordinates
};

fit_result lla_engine(const dataset& data, const kernel_spec& kern, const penalty_spec& pen,
                      const optim_config& cfg, theta cur, const engine_opts& eo) {
  data.validate();
  kern.validate();
  pen.validate();
  if (data.n() < 3)
    fail_invalid(error_code::dimension_mismatch, "need n >= 3 observations");

  const Eigen::Index p = data.p();
  const Eigen::Index q = data.q();
  active_set allowed = eo.allowed ? *eo.allowed : all_free_coordinates(p);
  check_active(allowed, p - 1);

  // Engine contract: coordinates outside the allowed support stay exactly zero.
  {
    Eigen::VectorXd mask = Eigen::VectorXd::Zero(p - 1);
    for (Eigen::Index j : allowed) mask(j) = 1.0;
    cur.index.alpha_free = cur.index.alpha_free.cwiseProduct(mask);
    project_alpha(cur.index.alpha_free);
  }
  if (!eo.include_beta)
    cur.beta = Eigen::VectorXd::Zero(q);
  else if (cur.beta.size() != q)
    fail_invalid(error_code::dimension_mismatch, "init beta has wrong length");

  fit_result res;
  profile_fit pf = profile_eta(data, cur, kern);
  linearized_problem prob = build_linearized(data, cur, kern, allowed, eo.include_beta, pf);

  // Per-coordinate gradient scales, frozen at this fit's first linearization.
  // The penalty acts on the scale-standardized coefficients s_j * alpha_j, so
  // the selection threshold stays commensurate with the noise level in the
  // linearized design no matter how steep the link is; without this, steep
  // links inflate the gradient columns and no single lambda can separate
  // signal from noise.
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(prob.n_alpha);
  if (eo.penalized)
    for (Eigen::Index j = 0; j < prob.n_alpha; ++j) {
      double s = std::sqrt(prob.z_star.col(j).squaredNorm() / data.n());
      if (s > 1e-10) scale(j) = s;
    }

  auto objective = [&](const theta& th, const profile_fit& pfx) {
    double obj = pfx.rss() / (2.0 * data.n());
    if (eo.penalized)
      for (std::size_t j = 0; j < allowed.size(); ++j)
        obj += pen.value(scale(static_cast<Eigen::Index>(j)) *
                         std::abs(th.index.alpha_free(allowed[j])));
    return obj;
  };

  double obj = objective(cur, pf);
  res.objective_trace.push_back(obj);

  bool cd_flagged = false, stalled = false;
  for (int k = 1; k <= cfg.max_outer_iters; ++k) {
    if (k > 1) prob = build_linearized(data, cur, kern, allowed, eo.include_beta, pf);
    for (Eigen::Index j = 0; j < prob.n_alpha; ++j) prob.z_star.col(j) /= scale(j);
    Eigen::VectorXd cur_scaled = scale.cwiseProduct(gather(cur.index.alpha_free, allowed));
    Eigen::VectorXd weights =
        eo.penalized ? lla_weights(pen, cur_scaled) : Eigen::VectorXd::Zero(prob.n_alpha);
    Eigen::VectorXd start(prob.n_alpha + prob.n_beta);
    start.head(prob.n_alpha) = cur_scaled;
    if (eo.include_beta) start.tail(q) = cur.beta;

    cd_result cd = solve_weighted_lasso(prob, weights, cfg, start);
    if (!cd.converged && !cd_flagged) {
      res.flags.push_back("cd_max_sweeps");
      cd_flagged = true;
    }

    theta cand = cur;
    for (std::size_t j = 0; j < allowed.size(); ++j)
      cand.index.alpha_free(allowed[j]) = cd.coef(j) / scale(static_cast<Eigen::Index>(j));
    project_alpha(cand.index.alpha_free);
    if (eo.include_beta) cand.beta = cd.coef.tail(q);

    profile_fit pf_c = profile_eta(data, cand, kern);
    double obj_c = objective(cand, pf_c);
    if (!std::isfinite(obj_c))
      fail_numeric(error_code::nonfinite_objective,
                   "objective became non-finite at outer iteration " + std::to_string(k));

    // Descent safeguard: the linearized step may overshoot the profile
    // objective; damp toward the current iterate, and stop if no damped step
    // descends (the trace stays nonincreasing by construction).
    double slack = 1e-10 * (1.0 + std::abs(obj));
    int halvings = 0;
    while (obj_c > obj + slack && halvings < 8) {
      cand.index.alpha_free = 0.5 * (cand.index.alpha_free + cur.index.alpha_free);
      cand.beta = 0.5 * (cand.beta + cur.beta);
      pf_c = profile_eta(data, cand, kern);
      obj_c = objective(cand, pf_c);
      ++halvings;
    }
    if (obj_c > obj + slack) {
      stalled = true;
      res.converged = true;
      break;
    }

    double step = (theta_stack(cand) - theta_stack(cur)).norm();
    cur = std::move(cand);
    pf = std::move(pf_c);
    obj = obj_c;
    res.objective_trace.push_back(obj);
    res.iterations = k;
    if (step <= cfg.outer_tol) {
      res.converged = true;
      break;
    }
  }

  if (stalled) res.flags.push_back("monotone_stall");
  if (!res.converged) res.flags.push_back("max_outer_iters");
  res.est = cur;
  res.active = nonzero_support(cur.index.alpha_free);
  res.rss = pf.rss();
  res.lambda = eo.penalized ? pen.lambda : 0.0;
  res.h = kern.h;
  res.gamma = pf.gamma;
  res.eta = pf.eta;
  res.slope = pf.slope;
  return res;
}

double linear_hbic(double rss, Eigen::Index n, Eigen::Index p, Eigen::Index nnz, double cn) {
  if (!(rss > 0.0)) return -std::numeric_limits<double>::infinity();
  return std::log(rss / n) + nnz * cn * std::log(static_cast<double>(p)) / n;
}

}  // namespace

Eigen::VectorXd theta_stack(const theta& th) {
  Eigen::VectorXd v(th.index.alpha_free.size() + th.beta.size());
  v.head(th.index.alpha_free.size()) = th.index.alpha_free;
  v.tail(th.beta.size()) = th.beta;
  return v;
}

theta theta_unstack(const Eigen::VectorXd& v, Eigen::Index p, Eigen::Index q) {
  if (v.size() != p - 1 + q)
    fail_invalid(error_code::dimension_mismatch, "stacked parameter has wrong length");
  theta th;
  th.index.alpha_free = v.head(p - 1);
  th.beta = v.tail(q);
  return th;
}

linearized_problem linearize(const dataset& data, const theta& th, const kernel_spec& kern) {
  profile_fit pf = profile_eta(data, th, kern);
  return build_linearized(data, th, kern, all_free_coordinates(data.p()), true, pf);
}

double weighted_lasso_objective(const linearized_problem& prob, const Eigen::VectorXd& weights,
                                const Eigen::VectorXd& coef) {
  double n = static_cast<double>(prob.y_star.size());
  double obj = (prob.y_star - prob.z_star * coef).squaredNorm() / (2.0 * n);
  for (Eigen::Index j = 0; j < prob.n_alpha; ++j) obj += weights(j) * std::abs(coef(j));
  return obj;
}

double weighted_lasso_kkt(const linearized_problem& prob, const Eigen::VectorXd& weights,
                          const Eigen::VectorXd& coef) {
  double n = static_cast<double>(prob.y_star.size());
  Eigen::VectorXd grad = prob.z_star.transpose() * (prob.z_star * coef - prob.y_star) / n;
  double kkt = 0.0;
  for (Eigen::Index j = 0; j < coef.size(); ++j) {
    double v;
    if (j >= prob.n_alpha)
      v = std::abs(grad(j));
    else if (coef(j) == 0.0)
      v = std::max(0.0, std::abs(grad(j)) - weights(j));
    else
      v = std::abs(grad(j) + (coef(j) > 0 ? weights(j) : -weights(j)));
    kkt = std::max(kkt, v);
  }
  return kkt;
}

cd_result solve_weighted_lasso(const linearized_problem& prob, const Eigen::VectorXd& weights,
                               const optim_config& cfg, const Eigen::VectorXd& start) {
  const Eigen::Index m = prob.z_star.cols();
  const double n = static_cast<double>(prob.y_star.size());
  if (weights.size() != prob.n_alpha)
    fail_invalid(error_code::dimension_mismatch, "one weight per penalized column required");
  if (start.size() != m)
    fail_invalid(error_code::dimension_mismatch, "start vector has wrong length");
  if ((weights.array() < 0.0).any())
    fail_invalid(error_code::negative_input, "penalty weights must be >= 0");

  Eigen::MatrixXd g = prob.z_star.transpose() * prob.z_star / n;
  Eigen::VectorXd c = prob.z_star.transpose() * prob.y_star / n;
  const double base = prob.y_star.squaredNorm() / (2.0 * n);

  cd_result res;
  res.coef = start;
  Eigen::VectorXd gc = g * res.coef;  // running G * coef

  auto penalty_of = [&](const Eigen::VectorXd& v) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < prob.n_alpha; ++j) s += weights(j) * std::abs(v(j));
    return s;
  };
  auto quad_obj = [&] {
    return base - c.dot(res.coef) + 0.5 * res.coef.dot(gc) + penalty_of(res.coef);
  };

  auto update = [&](Eigen::Index j) {
    double gj = g(j, j);
    double rho = c(j) - gc(j) + gj * res.coef(j);
    double nj;
    if (gj <= 0.0)
      nj = 0.0;
    else if (j < prob.n_alpha)
      nj = soft_threshold(rho, weights(j)) / gj;
    else
      nj = rho / gj;
    double d = nj - res.coef(j);
    if (d != 0.0) {
      gc += g.col(j) * d;
      res.coef(j) = nj;
    }
    return std::abs(d);
  };

  bool done = false;
  while (res.sweeps < cfg.cd_max_sweeps) {
    // Full pass, then cheap passes over the current support until stable.
    double delta = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) delta = std::max(delta, update(j));
    ++res.sweeps;
    res.objective_trace.push_back(quad_obj());
    while (delta > cfg.cd_tol && res.sweeps < cfg.cd_max_sweeps) {
      delta = 0.0;
      for (Eigen::Index j = 0; j < m; ++j)
        if (j >= prob.n_alpha || res.coef(j) != 0.0) delta = std::max(delta, update(j));
      ++res.sweeps;
      res.objective_trace.push_back(quad_obj());
    }
    if (delta > cfg.cd_tol) break;
    // Support stable; confirm optimality over all coordinates.
    res.kkt = weighted_lasso_kkt(prob, weights, res.coef);
    if (res.kkt <= cfg.kkt_tol) {
      done = true;
      break;
    }
  }
  if (!done) {
    res.kkt = weighted_lasso_kkt(prob, weights, res.coef);
    res.converged = res.kkt <= cfg.kkt_tol;
  }
  return res;
}

theta initial_theta(const dataset& data, const optim_config& cfg, bool constrained) {
  data.validate();
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.p();
  const Eigen::Index q = constrained ? 0 : data.q();

  linearized_problem prob;
  prob.n_alpha = p;
  prob.n_beta = q;
  prob.z_star.resize(n, p + q);
  prob.z_star.leftCols(p) = data.x;
  if (q > 0) prob.z_star.rightCols(q) = data.z;
  prob.y_star = data.y;

  // lambda_max: the KKT bound after profiling out the unpenalized block.
  Eigen::VectorXd r0 = data.y;
  Eigen::VectorXd beta_ols = Eigen::VectorXd::Zero(data.q());
  if (q > 0) {
    beta_ols = (data.z.transpose() * data.z)
                   .ldlt()
                   .solve(data.z.transpose() * data.y);
    r0 -= data.z * beta_ols;
  }
  double lambda_max = (data.x.transpose() * r0).cwiseAbs().maxCoeff() / n;

  Eigen::VectorXd best = Eigen::VectorXd::Zero(p + q);
  if (q > 0) best.tail(q) = beta_ols;
  if (lambda_max > 0.0) {
    double cn = cfg.hbic_cn > 0.0 ? cfg.hbic_cn : std::log(std::log(static_cast<double>(n)));
    int gs = std::max(2, cfg.lambda_grid_size);
    double best_ic = std::numeric_limits<double>::infinity();
    Eigen::VectorXd coef = best;
    bool have = false;
    for (int k = 0; k < gs; ++k) {
      double lam =
          lambda_max * std::pow(cfg.lambda_min_ratio, static_cast<double>(k) / (gs - 1));
      cd_result cd = solve_weighted_lasso(
          prob, Eigen::VectorXd::Constant(p, lam), cfg, coef);
      coef = cd.coef;
      double rss = (data.y - prob.z_star * coef).squaredNorm();
      Eigen::Index nnz = 0;
      for (Eigen::Index j = 0; j < p; ++j)
        if (coef(j) != 0.0) ++nnz;
      double ic = linear_hbic(rss, n, p, nnz, cn);
      if (!have || ic < best_ic) {
        have = true;
        best_ic = ic;
        best = coef;
      }
    }
  }

  Eigen::VectorXd b = best.head(p);
  theta th;
  th.beta = Eigen::VectorXd::Zero(data.q());
  if (!constrained) th.beta = best.tail(q);
  double nb = b.norm();
  if (nb == 0.0) {
    th.index.alpha_free = Eigen::VectorXd::Zero(p - 1);  // fall back to alpha = e_1
  } else {
    if (b(0) < 0.0) b = -b;
    th.index.alpha_free = b.tail(p - 1) / nb;
    project_alpha(th.index.alpha_free);
  }
  return th;
}

fit_result fit_plsim(const dataset& data, const kernel_spec& kern, const penalty_spec& pen,
                     const optim_config& cfg, const std::optional<theta>& init) {
  theta th0 = init ? *init : initial_theta(data, cfg, false);
  engine_opts eo;
  return lla_engine(data, kern, pen, cfg, th0, eo);
}

fit_result fit_constrained(const dataset& data, const kernel_spec& kern, const penalty_spec& pen,
                           const optim_config& cfg, const std::optional<theta>& init) {
  theta th0 = init ? *init : initial_theta(data, cfg, true);
  engine_opts eo;
  eo.include_beta = false;
  return lla_engine(data, kern, pen, cfg, th0, eo);
}

fit_result fit_restricted(const dataset& data, const kernel_spec& kern, const active_set& act,
                          const optim_config& cfg, bool include_beta) {
  check_active(act, data.p() - 1);
  // Deterministic seed: least squares of y on (x_1, active x columns, z),
  // normalized into the index parameterization.
  const Eigen::Index n = data.n();
  const Eigen::Index s = static_cast<Eigen::Index>(act.size());
  const Eigen::Index q = include_beta ? data.q() : 0;
  Eigen::MatrixXd design(n, s + 1 + q);
  design.col(0) = data.x.col(0);
  for (Eigen::Index k = 0; k < s; ++k) design.col(k + 1) = data.x.col(act[k] + 1);
  if (q > 0) design.rightCols(q) = data.z;
  Eigen::VectorXd sol =
      (design.transpose() * design).ldlt().solve(design.transpose() * data.y);

  Eigen::VectorXd b = sol.head(s + 1);
  if (b(0) < 0.0) b = -b;
  double nb = b.norm();
  theta th0;
  th0.index.alpha_free = Eigen::VectorXd::Zero(data.p() - 1);
  if (nb > 0.0)
    for (Eigen::Index k = 0; k < s; ++k) th0.index.alpha_free(act[k]) = b(k + 1) / nb;
  project_alpha(th0.index.alpha_free);
  th0.beta = Eigen::VectorXd::Zero(data.q());
  if (q > 0) th0.beta = sol.tail(q);

  engine_opts eo;
  eo.include_beta = include_beta;
  eo.penalized = false;
  eo.allowed = &act;
  penalty_spec nopen;
  nopen.lambda = 0.0;
  return lla_engine(data, kern, nopen, cfg, th0, eo);
}

double hbic(const dataset& data, const fit_result& fit, double cn_override) {
  const double n = static_cast<double>(data.n());
  double sigma2 = fit.rss / n;
  if (!(sigma2 > 0.0)) return -std::numeric_limits<double>::infinity();
  double cn = cn_override > 0.0 ? cn_override : std::log(std::log(n));
  return std::log(sigma2) +
         static_cast<double>(fit.active.size()) * cn * std::log(static_cast<double>(data.p())) / n;
}

lambda_selection select_lambda(const dataset& data, const kernel_spec& kern, penalty_spec pen,
                               const optim_config& cfg, bool constrained) {
  data.validate();
  theta init = initial_theta(data, cfg, constrained);

  lambda_selection sel;
  if (!cfg.lambda_grid.empty()) {
    sel.grid = cfg.lambda_grid;
    std::sort(sel.grid.begin(), sel.grid.end(), std::greater<>());
    for (double lam : sel.grid)
      if (!(lam > 0.0)) fail_invalid(error_code::invalid_option, "lambda grid must be positive");
  } else {
    profile_fit pf = profile_eta(data, init, kern);
    linearized_problem prob = build_linearized(data, init, kern,
                                               all_free_coordinates(data.p()),
                                               !constrained, pf);
    Eigen::VectorXd r = prob.y_star;
    if (prob.n_beta > 0) {
      Eigen::MatrixXd zb = prob.z_star.rightCols(prob.n_beta);
      r -= zb * (zb.transpose() * zb).ldlt().solve(zb.transpose() * prob.y_star);
    }
    // KKT bound on the gradient-standardized columns, matching the engine's
    // frozen-scale penalty.
    double lambda_max = 0.0;
    for (Eigen::Index j = 0; j < prob.n_alpha; ++j) {
      double s = std::sqrt(prob.z_star.col(j).squaredNorm() / data.n());
      double c = std::abs(prob.z_star.col(j).dot(r)) / data.n();
      lambda_max = std::max(lambda_max, s > 1e-10 ? c / s : c);
    }
    if (!(lambda_max > 0.0) || !std::isfinite(lambda_max)) lambda_max = 1e-8;
    int gs = std::max(2, cfg.lambda_grid_size);
    for (int k = 0; k < gs; ++k)
      sel.grid.push_back(lambda_max *
                         std::pow(cfg.lambda_min_ratio, static_cast<double>(k) / (gs - 1)));
  }

  const int gs = static_cast<int>(sel.grid.size());
  std::vector<std::optional<fit_result>> fits(gs);
  sel.hbic_trace.assign(gs, std::numeric_limits<double>::infinity());

  auto run_one = [&](int k, const std::optional<theta>& start) {
    penalty_spec pk = pen;
    pk.lambda = sel.grid[k];
    try {
      fits[k] = constrained ? fit_constrained(data, kern, pk, cfg, start)
                            : fit_plsim(data, kern, pk, cfg, start);
      sel.hbic_trace[k] = hbic(data, *fits[k], cfg.hbic_cn);
    } catch (const error&) {
      // counted below once the sweep is complete
    }
  };

  if (cfg.warm_start) {
    std::optional<theta> start = init;
    for (int k = 0; k < gs; ++k) {
      run_one(k, start);
      if (fits[k]) start = fits[k]->est;
    }
  } else {
    parallel_for(gs, [&](std::size_t k) { run_one(static_cast<int>(k), init); }, cfg.threads);
  }
  for (int k = 0; k < gs; ++k)
    if (!fits[k]) ++sel.failures;

  for (int k = 0; k < gs; ++k) {
    if (!fits[k]) continue;
    if (sel.index < 0 || sel.hbic_trace[k] < sel.hbic_trace[sel.index]) sel.index = k;
  }
  if (sel.index < 0)
    fail_numeric(error_code::all_fits_failed, "every lambda on the grid failed to fit");
  sel.lambda = sel.grid[sel.index];
  sel.fit = *fits[sel.index];
  if (sel.fit.rss == 0.0) sel.fit.flags.push_back("zero_rss");
  return sel;
}

}  // namespace plsim
