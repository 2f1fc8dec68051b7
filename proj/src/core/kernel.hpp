#pragma once

#include <cmath>

#include "core/errors.hpp"

namespace plsim {

enum class kernel_family { gaussian, epanechnikov };

// Smoothing kernel with bandwidth h > 0. k/dk are the base kernel and its
// derivative; kh/dkh fold in the scaling of K_h(u) = K(u/h)/h.
struct kernel_spec {
  kernel_family family = kernel_family::gaussian;
  double h = 1.0;

  void validate() const {
    if (!(h > 0.0) || !std::isfinite(h))
      fail_invalid(error_code::invalid_bandwidth, "bandwidth must be positive and finite");
  }

  double k(double u) const {
    if (family == kernel_family::gaussian)
      return 0.3989422804014327 * std::exp(-0.5 * u * u);
    double t = 1.0 - u * u;
    return t > 0.0 ? 0.75 * t : 0.0;
  }

  double dk(double u) const {
    if (family == kernel_family::gaussian)
      return -u * 0.3989422804014327 * std::exp(-0.5 * u * u);
    return u * u < 1.0 ? -1.5 * u : 0.0;
  }

  double kh(double u) const { return k(u / h) / h; }
  double dkh(double u) const { return dk(u / h) / (h * h); }
};

}  // namespace plsim
