#pragma once

// Shared helpers for the test binaries: small random problem generators and a
// brute-force reference solver for the weighted-L1 subproblem.

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "core/dataset.hpp"
#include "core/index.hpp"
#include "core/optimizer.hpp"

namespace plsim::test_support {

inline Eigen::VectorXd randn_vec(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = nd(rng);
  return v;
}

inline Eigen::MatrixXd randn_mat(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = nd(rng);
  return m;
}

// Unit index vector via its free part, kept away from the |alpha_free| = 1
// boundary so alpha_1 stays well defined under small perturbations.
inline index_param random_index(std::mt19937_64& rng, Eigen::Index p, double radius = 0.7) {
  index_param ip;
  ip.alpha_free = randn_vec(rng, p - 1);
  ip.alpha_free *= radius / ip.alpha_free.norm();
  return ip;
}

inline theta random_theta(std::mt19937_64& rng, Eigen::Index p, Eigen::Index q,
                          double radius = 0.7) {
  theta th;
  th.index = random_index(rng, p, radius);
  th.beta = randn_vec(rng, q);
  return th;
}

// Observations with a smooth bounded link, mild noise by default.
inline dataset smooth_dataset(std::mt19937_64& rng, Eigen::Index n, Eigen::Index p,
                              Eigen::Index q, const theta& th, double noise = 0.1) {
  dataset d;
  d.x = randn_mat(rng, n, p);
  d.z = randn_mat(rng, n, q);
  Eigen::VectorXd g = d.x * th.index.full_alpha();
  d.y = (g.array().sin() + 0.5 * g.array()).matrix() + d.z * th.beta;
  if (noise > 0.0) d.y += noise * randn_vec(rng, n);
  return d;
}

struct enum_solution {
  double objective = std::numeric_limits<double>::infinity();
  Eigen::VectorXd coef;
};

// Global optimum of
//   (2n)^-1 |y* - Z* c|^2 + sum_j w_j |c_j|   (alpha block penalized only)
// by enumerating sign patterns over the alpha block. For every pattern the
// stationarity system with fixed signs is solved; sign-consistent candidates
// are feasible points, and the true optimum is sign-consistent for its own
// pattern, so the minimum over candidates is the global minimum.
inline enum_solution enumerate_weighted_lasso(const linearized_problem& prob,
                                              const Eigen::VectorXd& weights) {
  const Eigen::Index na = prob.n_alpha;
  const Eigen::Index nb = prob.n_beta;
  const Eigen::Index m = na + nb;
  const double n = static_cast<double>(prob.y_star.size());
  const Eigen::MatrixXd gram = prob.z_star.transpose() * prob.z_star / n;
  const Eigen::VectorXd rhs = prob.z_star.transpose() * prob.y_star / n;
  const double base = prob.y_star.squaredNorm() / (2.0 * n);

  enum_solution best;
  best.coef = Eigen::VectorXd::Zero(m);
  best.objective = base;  // all-zero alpha, empty beta handled below when nb == 0

  std::vector<int> sign(na, -1);  // mixed-radix counter over {-1, 0, +1}^na
  bool more = true;
  while (more) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < na; ++j)
      if (sign[j] != 0) cols.push_back(j);
    const Eigen::Index s = static_cast<Eigen::Index>(cols.size());
    const Eigen::Index k = s + nb;
    if (k > 0) {
      Eigen::MatrixXd g(k, k);
      Eigen::VectorXd b(k);
      std::vector<Eigen::Index> full(cols);
      for (Eigen::Index j = 0; j < nb; ++j) full.push_back(na + j);
      for (Eigen::Index r = 0; r < k; ++r) {
        b(r) = rhs(full[r]);
        if (r < s) b(r) -= weights(cols[r]) * sign[cols[r]];
        for (Eigen::Index c = 0; c < k; ++c) g(r, c) = gram(full[r], full[c]);
      }
      Eigen::VectorXd sol = g.ldlt().solve(b);
      bool ok = (g * sol - b).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + b.cwiseAbs().maxCoeff());
      for (Eigen::Index r = 0; ok && r < s; ++r)
        if (sol(r) * sign[cols[r]] <= 0.0) ok = false;
      if (ok) {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(m);
        for (Eigen::Index r = 0; r < k; ++r) c(full[r]) = sol(r);
        double obj = (prob.y_star - prob.z_star * c).squaredNorm() / (2.0 * n);
        for (Eigen::Index j = 0; j < na; ++j) obj += weights(j) * std::abs(c(j));
        if (obj < best.objective) {
          best.objective = obj;
          best.coef = c;
        }
      }
    }
    more = false;
    for (Eigen::Index j = 0; j < na; ++j) {
      if (sign[j] < 1) {
        ++sign[j];
        more = true;
        break;
      }
      sign[j] = -1;
    }
  }
  return best;
}

// Random weighted-L1 instance: mixed zero/positive weights, optional beta
// block, n rows; some instances get correlated columns.
inline linearized_problem random_lasso_instance(std::mt19937_64& rng, Eigen::Index n,
                                                Eigen::Index na, Eigen::Index nb,
                                                Eigen::VectorXd* weights) {
  linearized_problem prob;
  prob.n_alpha = na;
  prob.n_beta = nb;
  prob.z_star = randn_mat(rng, n, na + nb);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  if (na + nb >= 2 && ud(rng) < 0.3)
    prob.z_star.col(1) = 0.9 * prob.z_star.col(0) + 0.1 * prob.z_star.col(1);
  Eigen::VectorXd truth = randn_vec(rng, na + nb);
  for (Eigen::Index j = 0; j < na; ++j)
    if (ud(rng) < 0.4) truth(j) = 0.0;
  prob.y_star = prob.z_star * truth + 0.5 * randn_vec(rng, n);
  weights->resize(na);
  for (Eigen::Index j = 0; j < na; ++j)
    (*weights)(j) = ud(rng) < 0.2 ? 0.0 : 0.3 * ud(rng);
  return prob;
}

}  // namespace plsim::test_support
