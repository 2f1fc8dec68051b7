#pragma once

namespace plsim {

// Regularized incomplete gamma functions P(a, x) (lower) and Q(a, x) (upper),
// a > 0, computed by the power series / continued fraction split at x = a + 1.
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Upper tail of the chi-square distribution with q >= 1 degrees of freedom.
double chisq_sf(double x, int q);

// Upper tail of the noncentral chi-square distribution, ncp >= 0. Poisson
// mixture expanded in both directions from the mode with relative tail
// truncation 1e-12.
double noncentral_chisq_sf(double x, int q, double ncp);

// Inverse CDF: the x with P(X <= x) = prob for chi-square with q dof.
double chisq_quantile(double prob, int q);

}  // namespace plsim
