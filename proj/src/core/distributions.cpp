#include "core/distributions.hpp"

#include <cmath>
#include <limits>

#include "core/errors.hpp"

namespace plsim {

namespace {

constexpr int kMaxIter = 2000;
constexpr double kEps = 1e-16;

// Lower regularized incomplete gamma by power series (use for x < a + 1).
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < kMaxIter; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * kEps)
      return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  fail_numeric(error_code::nonfinite_objective, "incomplete gamma series did not converge");
}

// Upper regularized incomplete gamma by modified Lentz continued fraction
// (use for x >= a + 1).
double gamma_q_cf(double a, double x) {
  const double tiny = std::numeric_limits<double>::min() / kEps;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIter; ++i) {
    double an = -static_cast<double>(i) * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps)
      return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  fail_numeric(error_code::nonfinite_objective, "incomplete gamma fraction did not converge");
}

}  // namespace

double gamma_p(double a, double x) {
  if (!(a > 0.0)) fail_invalid(error_code::invalid_option, "gamma_p needs a > 0");
  if (x <= 0.0) return 0.0;
  return x < a + 1.0 ? gamma_p_series(a, x) : 1.0 - gamma_q_cf(a, x);
}

double gamma_q(double a, double x) {
  if (!(a > 0.0)) fail_invalid(error_code::invalid_option, "gamma_q needs a > 0");
  if (x <= 0.0) return 1.0;
  return x < a + 1.0 ? 1.0 - gamma_p_series(a, x) : gamma_q_cf(a, x);
}

double chisq_sf(double x, int q) {
  if (q < 1) fail_invalid(error_code::invalid_dof, "chi-square needs q >= 1");
  if (!std::isfinite(x)) {
    if (std::isnan(x)) fail_invalid(error_code::nonfinite_input, "chisq_sf of NaN");
    return x > 0.0 ? 0.0 : 1.0;
  }
  if (x <= 0.0) return 1.0;
  return gamma_q(0.5 * q, 0.5 * x);
}

double noncentral_chisq_sf(double x, int q, double ncp) {
  if (q < 1) fail_invalid(error_code::invalid_dof, "chi-square needs q >= 1");
  if (!(ncp >= 0.0) || !std::isfinite(ncp))
    fail_invalid(error_code::invalid_option, "noncentrality must be >= 0 and finite");
  if (ncp == 0.0) return chisq_sf(x, q);
  if (x <= 0.0) return 1.0;

  const double tol = 1e-12;
  const double lam = 0.5 * ncp;
  const double xh = 0.5 * x;
  const double lxh = std::log(xh);

  // Start at the Poisson mode and the matching gamma tail, then walk both ways
  // using the Poisson ratio and the gamma recurrence
  // Q(a+1, x) = Q(a, x) + x^a e^-x / Gamma(a+1).
  const long k0 = static_cast<long>(lam);
  const double a0 = 0.5 * q + k0;
  double w0 = std::exp(-lam + k0 * std::log(lam) - std::lgamma(k0 + 1.0));
  double q0 = gamma_q(a0, xh);
  double sum = w0 * q0;

  double w = w0, qq = q0, a = a0;
  for (long k = k0; k - k0 < kMaxIter; ++k) {
    double delta = std::exp(a * lxh - xh - std::lgamma(a + 1.0));
    qq += delta;
    w *= lam / (k + 1.0);
    a += 1.0;
    double term = w * qq;
    sum += term;
    if (term <= tol * sum && k > static_cast<long>(lam)) break;
  }

  w = w0;
  qq = q0;
  a = a0;
  for (long k = k0; k > 0; --k) {
    w *= k / lam;
    a -= 1.0;
    qq -= std::exp(a * lxh - xh - std::lgamma(a + 1.0));
    if (qq < 0.0) qq = 0.0;
    double term = w * qq;
    sum += term;
    if (term <= tol * sum) break;
  }

  return sum < 1.0 ? sum : 1.0;
}

double chisq_quantile(double prob, int q) {
  if (q < 1) fail_invalid(error_code::invalid_dof, "chi-square needs q >= 1");
  if (!(prob > 0.0 && prob < 1.0))
    fail_invalid(error_code::invalid_level, "quantile level must lie in (0, 1)");
  double lo = 0.0, hi = q + 10.0;
  while (chisq_sf(hi, q) > 1.0 - prob) hi *= 2.0;
  for (int i = 0; i < 400; ++i) {
    double mid = 0.5 * (lo + hi);
    if (chisq_sf(mid, q) > 1.0 - prob)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-14 * (1.0 + hi)) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace plsim
