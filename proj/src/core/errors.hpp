#pragma once

#include <stdexcept>
#include <string>

namespace plsim {

// Category decides how a failure is surfaced at the boundary:
// bad inputs (exit code 2) vs numerical breakdowns (exit code 3) vs file problems.
enum class error_category { invalid_argument, numeric, io };

// Stable symbolic codes; these appear in messages and are asserted by tests.
enum class error_code {
  norm_violation,
  inactive_nonzero,
  dimension_mismatch,
  nonfinite_input,
  negative_input,
  invalid_bandwidth,
  invalid_dof,
  invalid_level,
  invalid_option,
  constant_column,
  parse_error,
  unknown_column,
  unknown_scenario,
  singular_local_fit,
  all_folds_singular,
  gradient_overflow,
  nonfinite_objective,
  init_failure,
  all_fits_failed,
  gn_diverged,
  zero_variance,
  singular_sigma,
  io_failure,
};

inline const char* to_string(error_code c) {
  switch (c) {
    case error_code::norm_violation: return "norm_violation";
    case error_code::inactive_nonzero: return "inactive_nonzero";
    case error_code::dimension_mismatch: return "dimension_mismatch";
    case error_code::nonfinite_input: return "nonfinite_input";
    case error_code::negative_input: return "negative_input";
    case error_code::invalid_bandwidth: return "invalid_bandwidth";
    case error_code::invalid_dof: return "invalid_dof";
    case error_code::invalid_level: return "invalid_level";
    case error_code::invalid_option: return "invalid_option";
    case error_code::constant_column: return "constant_column";
    case error_code::parse_error: return "parse_error";
    case error_code::unknown_column: return "unknown_column";
    case error_code::unknown_scenario: return "unknown_scenario";
    case error_code::singular_local_fit: return "singular_local_fit";
    case error_code::all_folds_singular: return "all_folds_singular";
    case error_code::gradient_overflow: return "gradient_overflow";
    case error_code::nonfinite_objective: return "nonfinite_objective";
    case error_code::init_failure: return "init_failure";
    case error_code::all_fits_failed: return "all_fits_failed";
    case error_code::gn_diverged: return "gn_diverged";
    case error_code::zero_variance: return "zero_variance";
    case error_code::singular_sigma: return "singular_sigma";
    case error_code::io_failure: return "io_failure";
  }
  return "unknown";
}

class error : public std::runtime_error {
 public:
  error(error_code code, error_category cat, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        cat_(cat) {}
  error_code code() const noexcept { return code_; }
  error_category category() const noexcept { return cat_; }

 private:
  error_code code_;
  error_category cat_;
};

[[noreturn]] inline void fail_invalid(error_code c, const std::string& msg) {
  throw error(c, error_category::invalid_argument, msg);
}
[[noreturn]] inline void fail_numeric(error_code c, const std::string& msg) {
  throw error(c, error_category::numeric, msg);
}
[[noreturn]] inline void fail_io(const std::string& msg) {
  throw error(error_code::io_failure, error_category::io, msg);
}

}  // namespace plsim
