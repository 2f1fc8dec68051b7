#include "core/index.hpp"

#include <algorithm>
#include <cmath>

namespace plsim {

namespace {
constexpr double kNormBound = 1.0 - 1e-10;
}

void index_param::validate() const {
  if (alpha_free.size() < 1)
    fail_invalid(error_code::dimension_mismatch, "alpha_free must have length p-1 >= 1");
  if (!alpha_free.allFinite())
    fail_invalid(error_code::nonfinite_input, "alpha_free entries must be finite");
  double nrm = alpha_free.norm();
  if (nrm >= kNormBound)
    fail_invalid(error_code::norm_violation,
                 "|alpha_free| = " + std::to_string(nrm) + " must be < 1");
}

double index_param::alpha1() const {
  validate();
  return std::sqrt(1.0 - alpha_free.squaredNorm());
}

Eigen::VectorXd index_param::full_alpha() const {
  Eigen::VectorXd a(p());
  a(0) = alpha1();
  a.tail(alpha_free.size()) = alpha_free;
  return a;
}

Eigen::MatrixXd jacobian(const index_param& ip) {
  double a1 = ip.alpha1();
  Eigen::Index m = ip.alpha_free.size();
  Eigen::MatrixXd j(m + 1, m);
  j.row(0) = -ip.alpha_free.transpose() / a1;
  j.bottomRows(m) = Eigen::MatrixXd::Identity(m, m);
  return j;
}

Eigen::MatrixXd jacobian_restricted(const index_param& ip, const active_set& act) {
  check_active(act, ip.alpha_free.size());
  for (Eigen::Index j = 0; j < ip.alpha_free.size(); ++j) {
    bool in_act = std::binary_search(act.begin(), act.end(), j);
    if (!in_act && ip.alpha_free(j) != 0.0)
      fail_invalid(error_code::inactive_nonzero,
                   "alpha_free(" + std::to_string(j) + ") nonzero outside active set");
  }
  double a1 = ip.alpha1();
  Eigen::Index s = static_cast<Eigen::Index>(act.size());
  Eigen::MatrixXd j(s + 1, s);
  for (Eigen::Index k = 0; k < s; ++k) j(0, k) = -ip.alpha_free(act[k]) / a1;
  j.bottomRows(s) = Eigen::MatrixXd::Identity(s, s);
  return j;
}

Eigen::VectorXd jacobian_t_apply(const index_param& ip, const Eigen::VectorXd& v) {
  if (v.size() != ip.p())
    fail_invalid(error_code::dimension_mismatch, "vector length must equal p");
  return v.tail(v.size() - 1) - ip.alpha_free * (v(0) / ip.alpha1());
}

active_set nonzero_support(const Eigen::VectorXd& v) {
  active_set act;
  for (Eigen::Index j = 0; j < v.size(); ++j)
    if (v(j) != 0.0) act.push_back(j);
  return act;
}

void check_active(const active_set& act, Eigen::Index size) {
  Eigen::Index prev = -1;
  for (Eigen::Index j : act) {
    if (j <= prev) fail_invalid(error_code::invalid_option, "active set must be sorted/unique");
    if (j < 0 || j >= size)
      fail_invalid(error_code::invalid_option, "active index out of range");
    prev = j;
  }
}

}  // namespace plsim
