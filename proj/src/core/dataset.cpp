#include "core/dataset.hpp"

namespace plsim {

void dataset::validate() const {
  if (x.rows() != y.size() || z.rows() != y.size())
    fail_invalid(error_code::dimension_mismatch, "x/z row counts must match y");
  if (p() < 2) fail_invalid(error_code::dimension_mismatch, "need p >= 2 index covariates");
  if (q() < 1) fail_invalid(error_code::dimension_mismatch, "need q >= 1 linear covariates");
  if (!y.allFinite() || !x.allFinite() || !z.allFinite())
    fail_invalid(error_code::nonfinite_input, "dataset entries must be finite");
}

}  // namespace plsim
