#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "core/errors.hpp"
#include "core/io.hpp"
#include "core/optimizer.hpp"
#include "support.hpp"

using namespace plsim;
namespace ts = plsim::test_support;
namespace fs = std::filesystem;
using nlohmann::json;

#ifndef PLSIM_SCHEMA_DIR
#define PLSIM_SCHEMA_DIR "schemas"
#endif

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

fs::path tmpdir() {
  static fs::path p = [] {
    fs::path d =
        fs::temp_directory_path() / ("plsim_io_test_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return p;
}

std::string path_in_tmp(const std::string& name) { return (tmpdir() / name).string(); }

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  out << body;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Structural validation for the subset of JSON Schema the published schemas
// use: type (single or list), properties, required, items, enum,
// additionalProperties: false.
bool matches_type(const std::string& t, const json& v) {
  if (t == "object") return v.is_object();
  if (t == "array") return v.is_array();
  if (t == "string") return v.is_string();
  if (t == "number") return v.is_number();
  if (t == "integer") return v.is_number_integer() || v.is_number_unsigned();
  if (t == "boolean") return v.is_boolean();
  if (t == "null") return v.is_null();
  return false;
}

bool validate_schema(const json& schema, const json& value, std::string& why,
                     const std::string& path = "$") {
  if (schema.contains("type")) {
    const json& t = schema["type"];
    bool ok = false;
    if (t.is_string()) {
      ok = matches_type(t.get<std::string>(), value);
    } else {
      for (const auto& tt : t)
        if (matches_type(tt.get<std::string>(), value)) ok = true;
    }
    if (!ok) {
      why = path + ": type mismatch (" + value.dump().substr(0, 40) + ")";
      return false;
    }
  }
  if (schema.contains("enum")) {
    bool ok = false;
    for (const auto& e : schema["enum"])
      if (e == value) ok = true;
    if (!ok) {
      why = path + ": value not in enum";
      return false;
    }
  }
  if (value.is_object()) {
    if (schema.contains("required")) {
      for (const auto& r : schema["required"])
        if (!value.contains(r.get<std::string>())) {
          why = path + ": missing required key '" + r.get<std::string>() + "'";
          return false;
        }
    }
    if (schema.contains("properties")) {
      for (auto it = value.begin(); it != value.end(); ++it) {
        if (schema["properties"].contains(it.key())) {
          if (!validate_schema(schema["properties"][it.key()], it.value(), why,
                               path + "." + it.key()))
            return false;
        } else if (schema.contains("additionalProperties") &&
                   schema["additionalProperties"].is_boolean() &&
                   !schema["additionalProperties"].get<bool>()) {
          why = path + ": unexpected key '" + it.key() + "'";
          return false;
        }
      }
    }
  }
  if (value.is_array() && schema.contains("items")) {
    for (std::size_t i = 0; i < value.size(); ++i)
      if (!validate_schema(schema["items"], value[i], why,
                           path + "[" + std::to_string(i) + "]"))
        return false;
  }
  return true;
}

void check_against_schema(const std::string& schema_name, const std::string& json_path) {
  json schema = json::parse(read_file(std::string(PLSIM_SCHEMA_DIR) + "/" + schema_name));
  json value = json::parse(read_file(json_path));
  std::string why;
  bool ok = validate_schema(schema, value, why);
  CAPTURE(schema_name);
  CAPTURE(why);
  CHECK(ok);
}

// Small fitted model reused by the emitter tests.
struct fitted_case {
  dataset data;
  fit_result fit;
  kernel_spec kern{kernel_family::gaussian, 0.37};
  penalty_spec pen;
};

const fitted_case& small_fit() {
  static fitted_case fc = [] {
    fitted_case c;
    std::mt19937_64 rng(8);
    theta th;
    th.index.alpha_free = Eigen::VectorXd::Zero(5);
    th.index.alpha_free(0) = 0.6;
    th.beta = Eigen::Vector2d(0.5, -0.3);
    c.data.x = ts::randn_mat(rng, 80, 6);
    c.data.z = ts::randn_mat(rng, 80, 2);
    Eigen::VectorXd g = c.data.x * th.index.full_alpha();
    c.data.y = (g.array().sin()).matrix() + c.data.z * th.beta +
               0.2 * ts::randn_vec(rng, 80);
    optim_config cfg;
    c.fit = fit_restricted(c.data, c.kern, {0}, cfg, true);
    return c;
  }();
  return fc;
}

}  // namespace

TEST_CASE("shortest round-trip decimal formatting") {
  for (double v : {0.1, 1.0 / 3.0, -2.5, 1e300, 5e-324, 0.0, 123456.789,
                   0.30000000000000004}) {
    std::string s = format_double(v);
    CHECK(std::stod(s) == v);
    CHECK(s.find(',') == std::string::npos);
  }
  CHECK(format_double(2.0) == "2");
  CHECK(format_double(-0.5) == "-0.5");
}

TEST_CASE("csv reading round-trips numeric tables") {
  std::string p = path_in_tmp("round.csv");
  write_file(p, "a,b,c\n1,2.5,-3e-2\n4,0.1,6\n");
  csv_table t = read_csv(p);
  REQUIRE(t.names.size() == 3);
  CHECK(t.names[0] == "a");
  CHECK(t.names[2] == "c");
  REQUIRE(t.values.rows() == 2);
  CHECK(t.values(0, 1) == 2.5);
  CHECK(t.values(0, 2) == -3e-2);
  CHECK(t.values(1, 0) == 4.0);

  // CRLF endings and blank lines are tolerated.
  write_file(p, "a,b\r\n1,2\r\n\r\n3,4\r\n");
  csv_table t2 = read_csv(p);
  CHECK(t2.values.rows() == 2);
  CHECK(t2.values(1, 1) == 4.0);
}

TEST_CASE("csv reading rejects malformed input") {
  std::string p = path_in_tmp("bad.csv");
  CHECK(thrown_code([&] { read_csv(path_in_tmp("missing.csv")); }) == error_code::io_failure);

  write_file(p, "");
  CHECK(thrown_code([&] { read_csv(p); }) == error_code::parse_error);
  write_file(p, "a,b\n");
  CHECK(thrown_code([&] { read_csv(p); }) == error_code::parse_error);
  write_file(p, "a,b\n1,2\n3\n");
  CHECK(thrown_code([&] { read_csv(p); }) == error_code::parse_error);
  write_file(p, "a,b\n1,zwei\n");
  CHECK(thrown_code([&] { read_csv(p); }) == error_code::parse_error);
  write_file(p, "a,b\n1,2,\n");
  CHECK(thrown_code([&] { read_csv(p); }) == error_code::parse_error);
  write_file(p, "a,b\n1,inf\n");
  CHECK(thrown_code([&] { read_csv(p); }) == error_code::parse_error);
  write_file(p, "a,b\n1,1e999\n");
  CHECK(thrown_code([&] { read_csv(p); }) == error_code::nonfinite_input);
}

TEST_CASE("loading standardizes to zero mean and unit population variance") {
  std::string p = path_in_tmp("std.csv");
  write_file(p, "y,x1,x2,z1\n1,1,5,2\n2,2,6,4\n3,3,9,6\n");
  dataset_roles roles;
  roles.response = "y";
  roles.linear = {"z1"};
  loaded_dataset ld = load_and_standardize(p, roles);

  CHECK(ld.standardized);
  CHECK(ld.y_name == "y");
  REQUIRE(ld.x_names == std::vector<std::string>{"x1", "x2"});
  REQUIRE(ld.z_names == std::vector<std::string>{"z1"});
  // Column (1,2,3) standardizes to +-sqrt(3/2) with the population scale.
  const double r = 1.2247448713915889;
  CHECK(ld.data.y(0) == doctest::Approx(-r).epsilon(1e-14));
  CHECK(ld.data.y(1) == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
  CHECK(ld.data.y(2) == doctest::Approx(r).epsilon(1e-14));
  CHECK(ld.data.x(0, 0) == doctest::Approx(-r).epsilon(1e-14));
  CHECK(ld.y_mean == 2.0);
  CHECK(ld.y_scale == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-14));
  for (Eigen::Index j = 0; j < 2; ++j) {
    CHECK(std::abs(ld.data.x.col(j).mean()) < 1e-14);
    CHECK(ld.data.x.col(j).squaredNorm() / 3.0 == doctest::Approx(1.0).epsilon(1e-13));
  }

  // Standardizing an already standardized dataset changes nothing.
  loaded_dataset again = standardize_dataset(ld.data);
  CHECK((again.data.y - ld.data.y).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((again.data.x - ld.data.x).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((again.data.z - ld.data.z).cwiseAbs().maxCoeff() < 1e-13);

  loaded_dataset raw = load_and_standardize(p, roles, false);
  CHECK(!raw.standardized);
  CHECK(raw.data.y(0) == 1.0);
  CHECK(raw.x_scale(0) == 1.0);
}

TEST_CASE("loading resolves roles and rejects misuse") {
  std::string p = path_in_tmp("roles.csv");
  write_file(p, "y,x1,x2,z1\n1,1,5,2\n2,2,6,4\n3,3,9,7\n");
  dataset_roles roles;
  roles.response = "nope";
  CHECK(thrown_code([&] { load_and_standardize(p, roles); }) == error_code::unknown_column);
  roles.response = "y";
  roles.linear = {"y"};
  CHECK(thrown_code([&] { load_and_standardize(p, roles); }) == error_code::invalid_option);
  roles.linear = {"z1", "z1"};
  CHECK(thrown_code([&] { load_and_standardize(p, roles); }) == error_code::invalid_option);
  roles.linear = {"z1"};
  roles.index = {"x1", "z1"};
  CHECK(thrown_code([&] { load_and_standardize(p, roles); }) == error_code::invalid_option);

  // Explicit index restriction keeps column order.
  roles.index = {"x2", "x1"};
  loaded_dataset ld = load_and_standardize(p, roles);
  REQUIRE(ld.x_names == std::vector<std::string>{"x2", "x1"});

  // A z-free load is allowed so screening/partition can run first.
  dataset_roles zfree;
  zfree.response = "y";
  loaded_dataset open = load_and_standardize(p, zfree);
  CHECK(open.data.q() == 0);
  CHECK(open.data.p() == 3);

  std::string pc = path_in_tmp("const.csv");
  write_file(pc, "y,x1,x2,z1\n1,7,5,2\n2,7,6,4\n3,7,9,7\n");
  dataset_roles rc;
  rc.response = "y";
  rc.linear = {"z1"};
  CHECK(thrown_code([&] { load_and_standardize(pc, rc); }) == error_code::constant_column);
}

TEST_CASE("screening ranks by absolute correlation with stable ties") {
  std::mt19937_64 rng(12);
  const Eigen::Index n = 300, p = 8;
  dataset d;
  d.x = ts::randn_mat(rng, n, p);
  d.z = Eigen::MatrixXd(n, 0);
  d.y = 2.0 * d.x.col(2) - 1.5 * d.x.col(5) + 0.05 * ts::randn_vec(rng, n);

  Eigen::VectorXd scores;
  std::vector<Eigen::Index> kept = screen_features(d, 2, &scores);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0] == 2);
  CHECK(kept[1] == 5);
  REQUIRE(scores.size() == p);
  CHECK(scores(2) > 0.8);
  CHECK(scores.minCoeff() >= 0.0);
  CHECK(scores.maxCoeff() <= 1.0);

  std::vector<Eigen::Index> all = screen_features(d, p, nullptr);
  REQUIRE(all.size() == static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) CHECK(all[j] == j);

  CHECK(thrown_code([&] { screen_features(d, 0, nullptr); }) == error_code::invalid_option);
  CHECK(thrown_code([&] { screen_features(d, p + 1, nullptr); }) ==
        error_code::invalid_option);
}

TEST_CASE("partition separates straight-line from curved strong covariates") {
  std::mt19937_64 rng(19);
  const Eigen::Index n = 400;
  dataset d;
  d.x = ts::randn_mat(rng, n, 3);
  d.z = Eigen::MatrixXd(n, 0);
  // x1 enters linearly, x2 through a strong sine, x3 not at all.
  d.y = 1.2 * d.x.col(0) + (2.5 * d.x.col(1)).array().sin().matrix() +
        0.1 * ts::randn_vec(rng, n);

  partition_options opt;
  partition_result res = partition_variables(d, opt);
  REQUIRE(res.score.size() == 3);
  CHECK(res.score(0) > 0.3);
  CHECK(std::find(res.linear_vars.begin(), res.linear_vars.end(), 0) !=
        res.linear_vars.end());
  CHECK(std::find(res.index_vars.begin(), res.index_vars.end(), 2) !=
        res.index_vars.end());
  // The weak covariate never even reaches the band check.
  CHECK(std::isnan(res.max_violation(2)));
  // Every variable lands in exactly one side.
  CHECK(res.linear_vars.size() + res.index_vars.size() == 3);

  // Determinism and column permutation equivariance: swap x1 and x2.
  partition_result res2 = partition_variables(d, opt);
  CHECK(res2.linear_vars == res.linear_vars);
  CHECK(res2.index_vars == res.index_vars);

  dataset swapped = d;
  swapped.x.col(0) = d.x.col(1);
  swapped.x.col(1) = d.x.col(0);
  partition_result res3 = partition_variables(swapped, opt);
  auto has = [](const std::vector<Eigen::Index>& v, Eigen::Index j) {
    return std::find(v.begin(), v.end(), j) != v.end();
  };
  CHECK(has(res3.linear_vars, 1) == has(res.linear_vars, 0));
  CHECK(has(res3.index_vars, 0) == has(res.index_vars, 1));

  CHECK(thrown_code([&] {
          partition_options bad;
          bad.band_k = 0.0;
          partition_variables(d, bad);
        }) == error_code::invalid_option);
}

TEST_CASE("strong nonlinearity is kept in the index part") {
  std::mt19937_64 rng(23);
  const Eigen::Index n = 300;
  dataset d;
  d.x = ts::randn_mat(rng, n, 2);
  d.z = Eigen::MatrixXd(n, 0);
  d.y = (1.8 * d.x.col(0)).array().sin().matrix() + 0.05 * ts::randn_vec(rng, n);
  partition_result res = partition_variables(d, {});
  if (res.score(0) > 0.3) {
    CHECK(std::find(res.index_vars.begin(), res.index_vars.end(), 0) !=
          res.index_vars.end());
    CHECK(res.max_violation(0) > 0.0);
  }
}

TEST_CASE("fit artifact json round-trips the estimate bit-exactly") {
  const fitted_case& fc = small_fit();
  std::string p = path_in_tmp("fit.json");
  write_fit_json(fc.fit, fc.data, fc.kern, fc.pen, nullptr, p);

  json j = json::parse(read_file(p));
  REQUIRE(j["coefficients"]["alpha_free"].size() == 5);
  for (Eigen::Index k = 0; k < 5; ++k)
    CHECK(j["coefficients"]["alpha_free"][k].get<double>() ==
          fc.fit.est.index.alpha_free(k));
  for (Eigen::Index k = 0; k < 2; ++k)
    CHECK(j["coefficients"]["beta"][k].get<double>() == fc.fit.est.beta(k));
  CHECK(j["coefficients"]["alpha"][0].get<double>() == fc.fit.est.index.alpha1());
  CHECK(j["model"]["n"] == 80);
  CHECK(j["model"]["p"] == 6);
  CHECK(j["fit"]["rss"].get<double>() == fc.fit.rss);
  CHECK(j["kernel"]["family"] == "gaussian");
  CHECK(!j.contains("columns"));

  check_against_schema("fit.schema.json", p);

  // Column metadata appears when a loaded dataset is supplied.
  loaded_dataset meta = standardize_dataset(fc.data);
  std::string p2 = path_in_tmp("fit_meta.json");
  write_fit_json(fc.fit, fc.data, fc.kern, fc.pen, &meta, p2);
  json j2 = json::parse(read_file(p2));
  CHECK(j2["columns"]["response"] == "y");
  CHECK(j2["standardization"]["applied"] == true);
  check_against_schema("fit.schema.json", p2);
}

TEST_CASE("curve artifact has one row per observation") {
  const fitted_case& fc = small_fit();
  std::string p = path_in_tmp("curve.csv");
  write_curve_csv(fc.fit, fc.data, p);
  csv_table t = read_csv(p);
  REQUIRE(t.names.size() == 3);
  CHECK(t.values.rows() == fc.data.n());
  // First column is the fitted index, strictly finite.
  CHECK(t.values.allFinite());
}

TEST_CASE("test artifact json carries both, either, or no test blocks") {
  beta_test_result bt;
  bt.t_n = 3.2;
  bt.df = 2;
  bt.p_value = 0.2;
  bt.rss0 = 10.0;
  bt.rss1 = 9.0;
  bt.flags = {"nonpositive_numerator"};
  eta_test_result et;
  et.s_n = 0.01;
  et.sigma_s2 = 0.5;
  et.v_n = 1.1;
  et.v_n_sq = 1.21;
  et.p_value = 0.27;
  et.b = 0.3;
  et.zeta = Eigen::VectorXd::Constant(1, 0.9);

  std::string p = path_in_tmp("tests.json");
  write_tests_json(&bt, &et, p);
  json j = json::parse(read_file(p));
  CHECK(j["beta_test"]["t_n"] == 3.2);
  CHECK(j["beta_test"]["flags"][0] == "nonpositive_numerator");
  CHECK(j["eta_test"]["v_n_sq"] == 1.21);
  check_against_schema("tests.schema.json", p);

  write_tests_json(&bt, nullptr, p);
  j = json::parse(read_file(p));
  CHECK(j["eta_test"].is_null());
  check_against_schema("tests.schema.json", p);

  write_tests_json(nullptr, nullptr, p);
  j = json::parse(read_file(p));
  CHECK(j["beta_test"].is_null());
  check_against_schema("tests.schema.json", p);
}

TEST_CASE("summary artifacts") {
  summary_table t;
  t.seed = 99;
  t.level = 0.05;
  t.h = 0.37;

  std::string p = path_in_tmp("summary.csv");
  write_summary_csv(t, p);
  std::string body = read_file(p);
  CHECK(body ==
        "model,pipeline,n,p,signal,reps,failures,descent_violations,tpr,fpr,"
        "bias_b1,mse_b1,bias_b2,mse_b2,bias_a1,mse_a1,bias_a2,mse_a2,bias_a3,mse_a3,"
        "reject_rate,reject_se,mean_stat\n");

  summary_row r;
  r.model = "1a";
  r.pipeline = "fit";
  r.n = 200;
  r.p = 100;
  r.signal = 0.1;
  r.reps = 3;
  r.tpr = 100.0;
  r.fpr = 0.5;
  r.bias_beta = {0.01, -0.02};
  r.mse_beta = {0.001, 0.002};
  r.bias_alpha = {0.0, 0.1, -0.1};
  r.mse_alpha = {0.0, 0.01, 0.01};
  t.rows.push_back(r);
  summary_row rt;
  rt.model = "1b-i";
  rt.pipeline = "test-beta";
  rt.n = 200;
  rt.p = 100;
  rt.signal = 0.0;
  rt.reps = 3;
  rt.reject_rate = 0.05;
  rt.reject_se = 0.01;
  rt.mean_stat = 2.1;
  t.rows.push_back(rt);

  write_summary_csv(t, p);
  csv_table parsed = read_csv(p);  // numeric columns only after the two labels?
  // The label columns make this non-numeric; check shape on raw text instead.
  (void)parsed;

  std::string pj = path_in_tmp("summary.json");
  write_summary_json(t, pj);
  json j = json::parse(read_file(pj));
  CHECK(j["seed"] == 99);
  REQUIRE(j["rows"].size() == 2);
  CHECK(j["rows"][0]["tpr"] == 100.0);
  CHECK(j["rows"][0]["reject_rate"].is_null());
  CHECK(j["rows"][1]["reject_rate"] == 0.05);
  CHECK(j["rows"][1]["tpr"].is_null());
  check_against_schema("summary.schema.json", pj);
}

TEST_CASE("partition artifact json uses column names") {
  partition_result res;
  res.linear_vars = {1};
  res.index_vars = {0, 2};
  res.score = Eigen::Vector3d(0.1, 0.8, 0.4);
  res.max_violation = Eigen::Vector3d(std::nan(""), -0.2, 0.3);
  res.flags = {"band_singular_x3"};
  std::string p = path_in_tmp("partition.json");
  write_partition_json(res, {"a", "b", "c"}, p);
  json j = json::parse(read_file(p));
  CHECK(j["linear"][0] == "b");
  CHECK(j["index"][0] == "a");
  CHECK(j["index"][1] == "c");
  CHECK(j["max_violation"][0].is_null());
  CHECK(j["max_violation"][1] == -0.2);
  check_against_schema("partition.schema.json", p);
}

TEST_CASE("wide survey-shaped table loads, screens and partitions end to end") {
  std::mt19937_64 rng(2718);
  const Eigen::Index n = 464, p = 1200;
  Eigen::MatrixXd x = ts::randn_mat(rng, n, p);
  Eigen::VectorXd y = 1.5 * x.col(10) + (2.0 * x.col(20)).array().sin().matrix() +
                      0.5 * ts::randn_vec(rng, n);
  std::string path = path_in_tmp("wide.csv");
  {
    std::ofstream out(path, std::ios::binary);
    out << "sales";
    for (Eigen::Index j = 0; j < p; ++j) out << ",v" << (j + 1);
    out << "\n";
    for (Eigen::Index i = 0; i < n; ++i) {
      out << format_double(y(i));
      for (Eigen::Index j = 0; j < p; ++j) out << ',' << format_double(x(i, j));
      out << "\n";
    }
  }

  dataset_roles roles;
  roles.response = "sales";
  loaded_dataset ld = load_and_standardize(path, roles);
  CHECK(ld.data.n() == n);
  CHECK(ld.data.p() == p);
  CHECK(ld.data.q() == 0);

  std::vector<Eigen::Index> kept = screen_features(ld.data, 40, nullptr);
  CHECK(std::find(kept.begin(), kept.end(), 10) != kept.end());
  CHECK(std::find(kept.begin(), kept.end(), 20) != kept.end());

  dataset sub;
  sub.y = ld.data.y;
  sub.z = Eigen::MatrixXd(n, 0);
  sub.x.resize(n, kept.size());
  for (std::size_t k = 0; k < kept.size(); ++k) sub.x.col(k) = ld.data.x.col(kept[k]);

  partition_result part = partition_variables(sub, {});
  Eigen::Index pos10 = std::distance(kept.begin(), std::find(kept.begin(), kept.end(), 10));
  Eigen::Index pos20 = std::distance(kept.begin(), std::find(kept.begin(), kept.end(), 20));
  CHECK(std::find(part.linear_vars.begin(), part.linear_vars.end(), pos10) !=
        part.linear_vars.end());
  CHECK(std::find(part.index_vars.begin(), part.index_vars.end(), pos20) !=
        part.index_vars.end());
}
