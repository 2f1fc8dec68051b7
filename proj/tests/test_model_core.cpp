#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <random>

#include "core/dataset.hpp"
#include "core/errors.hpp"
#include "core/index.hpp"
#include "core/optimizer.hpp"
#include "support.hpp"

using namespace plsim;
namespace ts = plsim::test_support;

namespace {

error_code thrown_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const error& e) {
    return e.code();
  }
  FAIL("expected a plsim::error");
  return error_code::io_failure;
}

}  // namespace

TEST_CASE("dataset validation accepts well-formed data") {
  dataset d;
  d.y = Eigen::VectorXd::Zero(5);
  d.x = Eigen::MatrixXd::Ones(5, 3);
  d.z = Eigen::MatrixXd::Ones(5, 2);
  CHECK_NOTHROW(d.validate());
  CHECK(d.n() == 5);
  CHECK(d.p() == 3);
  CHECK(d.q() == 2);
}

TEST_CASE("dataset validation rejects malformed data") {
  dataset d;
  d.y = Eigen::VectorXd::Zero(5);
  d.x = Eigen::MatrixXd::Ones(5, 3);
  d.z = Eigen::MatrixXd::Ones(5, 2);

  SUBCASE("row mismatch") {
    d.x = Eigen::MatrixXd::Ones(4, 3);
    CHECK(thrown_code([&] { d.validate(); }) == error_code::dimension_mismatch);
  }
  SUBCASE("too few index covariates") {
    d.x = Eigen::MatrixXd::Ones(5, 1);
    CHECK(thrown_code([&] { d.validate(); }) == error_code::dimension_mismatch);
  }
  SUBCASE("no linear covariates") {
    d.z = Eigen::MatrixXd(5, 0);
    CHECK(thrown_code([&] { d.validate(); }) == error_code::dimension_mismatch);
  }
  SUBCASE("non-finite entry") {
    d.y(2) = std::numeric_limits<double>::quiet_NaN();
    CHECK(thrown_code([&] { d.validate(); }) == error_code::nonfinite_input);
  }
}

TEST_CASE("index parameter implies the anchor coordinate") {
  index_param ip;
  ip.alpha_free = Eigen::Vector2d(0.3, -0.4);
  CHECK(ip.p() == 3);
  CHECK(ip.alpha1() == doctest::Approx(0.86602540378443865).epsilon(1e-15));
  Eigen::VectorXd full = ip.full_alpha();
  CHECK(full.size() == 3);
  CHECK(full(0) == ip.alpha1());
  CHECK(full(1) == 0.3);
  CHECK(full(2) == -0.4);
  CHECK(full.norm() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("index parameter rejects out-of-ball and non-finite values") {
  index_param ip;
  ip.alpha_free = Eigen::Vector2d(0.8, 0.61);  // norm > 1
  CHECK(thrown_code([&] { ip.validate(); }) == error_code::norm_violation);
  ip.alpha_free = Eigen::Vector2d(1.0, 0.0);  // norm exactly at the open boundary
  CHECK(thrown_code([&] { ip.validate(); }) == error_code::norm_violation);
  ip.alpha_free = Eigen::Vector2d(std::numeric_limits<double>::infinity(), 0.0);
  CHECK(thrown_code([&] { ip.validate(); }) == error_code::nonfinite_input);
  ip.alpha_free = Eigen::VectorXd(0);
  CHECK(thrown_code([&] { ip.validate(); }) == error_code::dimension_mismatch);
}

TEST_CASE("jacobian first row and identity block") {
  index_param ip;
  ip.alpha_free = Eigen::Vector2d(0.3, -0.4);
  Eigen::MatrixXd j = jacobian(ip);
  REQUIRE(j.rows() == 3);
  REQUIRE(j.cols() == 2);
  CHECK(j(0, 0) == doctest::Approx(-0.34641016151377546).epsilon(1e-15));
  CHECK(j(0, 1) == doctest::Approx(0.46188021535170065).epsilon(1e-15));
  CHECK(j.bottomRows(2).isApprox(Eigen::MatrixXd::Identity(2, 2), 0.0));
}

TEST_CASE("jacobian matches finite differences of the full vector") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 10; ++rep) {
    index_param ip = ts::random_index(rng, 6);
    Eigen::MatrixXd j = jacobian(ip);
    const double step = 1e-6;
    for (Eigen::Index k = 0; k < ip.alpha_free.size(); ++k) {
      index_param hi = ip, lo = ip;
      hi.alpha_free(k) += step;
      lo.alpha_free(k) -= step;
      Eigen::VectorXd fd = (hi.full_alpha() - lo.full_alpha()) / (2.0 * step);
      CHECK((j.col(k) - fd).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("transposed jacobian application avoids forming the matrix") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    index_param ip = ts::random_index(rng, 8);
    Eigen::VectorXd v = ts::randn_vec(rng, 8);
    Eigen::VectorXd direct = jacobian(ip).transpose() * v;
    Eigen::VectorXd fast = jacobian_t_apply(ip, v);
    CHECK((direct - fast).cwiseAbs().maxCoeff() < 1e-14);
  }
  index_param ip = ts::random_index(rng, 8);
  CHECK(thrown_code([&] { jacobian_t_apply(ip, Eigen::VectorXd::Zero(5)); }) ==
        error_code::dimension_mismatch);
}

TEST_CASE("restricted jacobian equals the matching full columns") {
  index_param ip;
  ip.alpha_free = Eigen::VectorXd::Zero(5);
  ip.alpha_free(1) = 0.5;
  ip.alpha_free(3) = -0.3;
  active_set act{1, 3};
  Eigen::MatrixXd jr = jacobian_restricted(ip, act);
  REQUIRE(jr.rows() == 3);
  REQUIRE(jr.cols() == 2);
  Eigen::MatrixXd j = jacobian(ip);
  CHECK(jr(0, 0) == j(0, 1));
  CHECK(jr(0, 1) == j(0, 3));
  CHECK(jr.bottomRows(2).isApprox(Eigen::MatrixXd::Identity(2, 2), 0.0));

  ip.alpha_free(2) = 0.1;  // nonzero outside the active set
  CHECK(thrown_code([&] { jacobian_restricted(ip, act); }) == error_code::inactive_nonzero);
}

TEST_CASE("active set bookkeeping") {
  Eigen::VectorXd v(5);
  v << 0.0, 1.5, 0.0, -2.0, 1e-300;
  active_set act = nonzero_support(v);
  REQUIRE(act.size() == 3);
  CHECK(act[0] == 1);
  CHECK(act[1] == 3);
  CHECK(act[2] == 4);

  CHECK_NOTHROW(check_active({0, 2, 4}, 5));
  CHECK(thrown_code([&] { check_active({2, 1}, 5); }) == error_code::invalid_option);
  CHECK(thrown_code([&] { check_active({1, 1}, 5); }) == error_code::invalid_option);
  CHECK(thrown_code([&] { check_active({5}, 5); }) == error_code::invalid_option);
}

TEST_CASE("theta round-trips through its stacked form") {
  std::mt19937_64 rng(3);
  theta th = ts::random_theta(rng, 6, 3);
  Eigen::VectorXd v = theta_stack(th);
  REQUIRE(v.size() == 8);
  theta back = theta_unstack(v, 6, 3);
  CHECK((back.index.alpha_free - th.index.alpha_free).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.beta - th.beta).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("error taxonomy carries code and category") {
  try {
    fail_invalid(error_code::invalid_bandwidth, "msg");
  } catch (const error& e) {
    CHECK(e.code() == error_code::invalid_bandwidth);
    CHECK(e.category() == error_category::invalid_argument);
    CHECK(std::string(e.what()).find("invalid_bandwidth") == 0);
  }
  try {
    fail_numeric(error_code::singular_local_fit, "msg");
  } catch (const error& e) {
    CHECK(e.category() == error_category::numeric);
  }
  try {
    fail_io("msg");
  } catch (const error& e) {
    CHECK(e.code() == error_code::io_failure);
    CHECK(e.category() == error_category::io);
  }
  CHECK(std::string(to_string(error_code::all_fits_failed)) == "all_fits_failed");
  CHECK(std::string(to_string(error_code::norm_violation)) == "norm_violation");
}
