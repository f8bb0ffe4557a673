#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "fewshot/fewshot.h"

namespace {

double sq_dist(const double* a, const double* b, size_t d) {
  double s = 0.0;
  for (size_t i = 0; i < d; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::strlen(fsl_version()) > 0);
  CHECK(std::string(fsl_status_name(FSL_OK)) == "ok");
  CHECK(std::string(fsl_status_name(FSL_CONFIG)) == "config error");
  CHECK(std::string(fsl_status_name(static_cast<fsl_status>(99))) == "unknown status");
}

TEST_CASE("kernel handles") {
  fsl_kernel* k = nullptr;
  REQUIRE(fsl_kernel_gaussian(0.5, &k) == FSL_OK);
  const double x[] = {1.0, 2.0};
  const double y[] = {0.0, 1.5};
  double v = 0.0;
  REQUIRE(fsl_kernel_eval(k, x, y, 2, &v) == FSL_OK);
  CHECK(v == doctest::Approx(std::exp(-sq_dist(x, y, 2) / (2 * 0.5))));
  fsl_kernel_free(k);

  REQUIRE(fsl_kernel_from_json("{\"type\":\"polynomial\",\"degree\":3,\"bias\":0.5}", &k) == FSL_OK);
  REQUIRE(fsl_kernel_eval(k, x, y, 2, &v) == FSL_OK);
  CHECK(v == doctest::Approx(std::pow(0.25 + 3.0, 3)));
  fsl_kernel_free(k);
  fsl_kernel_free(nullptr);

  k = nullptr;
  CHECK(fsl_kernel_gaussian(-1.0, &k) == FSL_INVALID_ARGUMENT);
  CHECK(k == nullptr);
  CHECK(std::strlen(fsl_last_error()) > 0);
  CHECK(fsl_kernel_polynomial(0, 1.0, &k) == FSL_INVALID_ARGUMENT);
  CHECK(fsl_kernel_from_json("{\"type\":", &k) == FSL_CONFIG);
  CHECK(fsl_kernel_from_json("{\"type\":\"cosine\"}", &k) == FSL_CONFIG);
  CHECK(fsl_kernel_linear(0.0, nullptr) == FSL_INVALID_ARGUMENT);
  CHECK(fsl_kernel_eval(nullptr, x, y, 2, &v) == FSL_INVALID_ARGUMENT);
}

TEST_CASE("combinations, norms and geometry") {
  fsl_kernel* k = nullptr;
  REQUIRE(fsl_kernel_linear(0.0, &k) == FSL_OK);
  const double support[] = {1.0, 0.0, 0.0, 1.0, -1.0, -1.0};
  fsl_combination* mean = nullptr;
  REQUIRE(fsl_combination_create(k, support, 3, 2, nullptr, &mean) == FSL_OK);
  double s = -1.0;
  REQUIRE(fsl_combination_self_inner(mean, &s) == FSL_OK);
  CHECK(s == doctest::Approx(0.0));

  const double pts[] = {3.0, 4.0, 0.0, 0.0};
  double norms[2];
  REQUIRE(fsl_centered_sq_norms(mean, pts, 2, 2, norms) == FSL_OK);
  CHECK(norms[0] == doctest::Approx(25.0));
  CHECK(norms[1] == doctest::Approx(0.0));

  const double w[] = {2.0};
  const double e1[] = {1.0, 0.0};
  fsl_combination* v = nullptr;
  REQUIRE(fsl_combination_create(k, e1, 1, 2, w, &v) == FSL_OK);
  double inners[2];
  REQUIRE(fsl_centered_inners(mean, v, pts, 2, 2, inners) == FSL_OK);
  CHECK(inners[0] == doctest::Approx(6.0));
  double in = 0.0;
  REQUIRE(fsl_centered_inner(mean, pts, support, 2, &in) == FSL_OK);
  CHECK(in == doctest::Approx(3.0));

  double r = 0.0;
  REQUIRE(fsl_enclosing_radius(mean, support, 3, 2, &r) == FSL_OK);
  CHECK(r == doctest::Approx(std::sqrt(2.0)));

  std::vector<double> probes(2000 * 2);
  REQUIRE(fsl_sample_domain(FSL_DOMAIN_UNIT_BALL, 2, 0.0, 2000, 7, probes.data()) == FSL_OK);
  fsl_combination* origin = nullptr;
  const double zero[] = {0.0, 0.0};
  REQUIRE(fsl_combination_create(k, zero, 1, 2, nullptr, &origin) == FSL_OK);
  fsl_ratio_estimate est{};
  REQUIRE(fsl_ball_ratio(origin, probes.data(), 2000, 2, 1.0, 0.5, 2.5758293035489004, &est) == FSL_OK);
  CHECK(est.trials == 2000);
  CHECK(est.ci_low <= 0.25);
  CHECK(0.25 <= est.ci_high);
  REQUIRE(fsl_cap_ratio(origin, v, probes.data(), 2000, 2, 1.0, 0.0, 1.96, &est) == FSL_OK);
  CHECK(est.ratio == doctest::Approx(0.5).epsilon(0.1));
  CHECK(fsl_ball_ratio(origin, probes.data(), 2000, 2, 1.0, 1.5, 1.96, &est) == FSL_INVALID_ARGUMENT);

  std::vector<double> cube(50 * 3);
  REQUIRE(fsl_sample_domain(FSL_DOMAIN_CUBE, 3, 2.0, 50, 1, cube.data()) == FSL_OK);
  for (double c : cube) CHECK(std::abs(c) <= 2.0);
  fsl_orthogonality o{};
  REQUIRE(fsl_orthogonality_stats(k, cube.data(), 50, 3, &o) == FSL_OK);
  CHECK(o.pairs + o.excluded_pairs == 50 * 49 / 2);
  CHECK(o.mean_abs_cos > 0.0);
  CHECK(fsl_sample_domain(FSL_DOMAIN_CUBE, 3, 0.0, 50, 1, cube.data()) == FSL_INVALID_ARGUMENT);
  CHECK(fsl_sample_domain(static_cast<fsl_domain_kind>(7), 3, 1.0, 50, 1, cube.data()) == FSL_INVALID_ARGUMENT);

  fsl_combination_free(origin);
  fsl_combination_free(v);
  fsl_combination_free(mean);
  fsl_kernel_free(k);
}

TEST_CASE("model lifecycle") {
  fsl_kernel* k = nullptr;
  REQUIRE(fsl_kernel_linear(0.0, &k) == FSL_OK);
  const double old_pts[] = {0.0, 0.0, 0.0, 2.0};
  fsl_combination* cz = nullptr;
  REQUIRE(fsl_combination_create(k, old_pts, 2, 2, nullptr, &cz) == FSL_OK);
  const double shots[] = {4.0, 1.0, 4.0, 1.0};
  fsl_model* m = nullptr;
  REQUIRE(fsl_model_fit(k, shots, 2, 2, cz, &m) == FSL_OK);
  double d2 = 0.0;
  REQUIRE(fsl_model_dist2(m, &d2) == FSL_OK);
  CHECK(d2 == doctest::Approx(16.0));
  // (x - mu, mu - c_z) with mu = (4, 1), c_z = (0, 1).
  const double tests[] = {4.0, 1.0, 0.0, 1.0, 5.0, 3.0};
  double dv[3];
  REQUIRE(fsl_model_decision_values(m, tests, 3, 2, dv) == FSL_OK);
  CHECK(dv[0] == doctest::Approx(0.0));
  CHECK(dv[1] == doctest::Approx(-16.0));
  CHECK(dv[2] == doctest::Approx(4.0));
  int is_new = -1;
  REQUIRE(fsl_model_classify(m, tests, 2, 0.0, &is_new) == FSL_OK);
  CHECK(is_new == 1);
  REQUIRE(fsl_model_classify(m, tests + 2, 2, -1.0, &is_new) == FSL_OK);
  CHECK(is_new == 0);
  CHECK(fsl_model_decision_values(m, tests, 2, 3, dv) == FSL_INVALID_ARGUMENT);
  CHECK(fsl_model_fit(k, shots, 0, 2, cz, &m) == FSL_INVALID_ARGUMENT);
  fsl_model_free(m);
  fsl_model_free(nullptr);

  const double pos[] = {3.0, 2.0};
  const double neg[] = {1.0, 2.0};
  double a = 0.0;
  REQUIRE(fsl_auroc(pos, 2, neg, 2, &a) == FSL_OK);
  CHECK(a == doctest::Approx(0.875));
  const double bad[] = {NAN};
  CHECK(fsl_auroc(bad, 1, neg, 2, &a) == FSL_NUMERIC);
  fsl_combination_free(cz);
  fsl_kernel_free(k);
}

TEST_CASE("tables") {
  const std::string text = "a,b,label\n1,2,x\n3,4.5,y\n";
  fsl_table* t = nullptr;
  REQUIRE(fsl_table_parse(text.data(), text.size(), "mem.csv", &t) == FSL_OK);
  size_t rows = 0, width = 0;
  REQUIRE(fsl_table_shape(t, &rows, &width) == FSL_OK);
  CHECK(rows == 2);
  CHECK(width == 2);
  double row[2];
  REQUIRE(fsl_table_row(t, 1, row) == FSL_OK);
  CHECK(row[1] == 4.5);
  const char* label = nullptr;
  REQUIRE(fsl_table_label(t, 1, &label) == FSL_OK);
  CHECK(std::string(label) == "y");
  CHECK(fsl_table_label(t, 2, &label) == FSL_INVALID_ARGUMENT);
  const char* sum = nullptr;
  REQUIRE(fsl_table_checksum(t, &sum) == FSL_OK);
  CHECK(std::strlen(sum) == 16);
  fsl_table_free(t);

  const std::string bad = "a,label\nzz,x\n";
  CHECK(fsl_table_parse(bad.data(), bad.size(), "bad.csv", &t) == FSL_INPUT_DATA);
  CHECK(std::string(fsl_last_error()).find("bad.csv:2") != std::string::npos);
  CHECK(fsl_table_read("/nonexistent/x.csv", &t) == FSL_IO);
}

TEST_CASE("experiments through the C interface") {
  char* report = nullptr;
  REQUIRE(fsl_run_experiment("orthogonality", "{\"dims\":[3],\"n\":20}", nullptr, &report) == FSL_OK);
  REQUIRE(report != nullptr);
  CHECK(std::string(report).find("\"provenance\"") != std::string::npos);
  fsl_string_free(report);

  report = nullptr;
  CHECK(fsl_run_experiment("orthogonality", "{not json", nullptr, &report) == FSL_CONFIG);
  CHECK(std::string(fsl_last_error()).find("not valid JSON") != std::string::npos);
  CHECK(report == nullptr);
  CHECK(fsl_run_experiment("orthogonality", "{\"x\":1}", nullptr, &report) == FSL_CONFIG);
  CHECK(fsl_run_experiment("ingest-check", "{\"input\":\"/nonexistent\"}", nullptr, &report) == FSL_CONFIG);
  CHECK(fsl_run_experiment(nullptr, "{}", nullptr, &report) == FSL_INVALID_ARGUMENT);

  const auto dir = std::filesystem::temp_directory_path() / "fewshot_capi_out";
  std::filesystem::remove_all(dir);
  REQUIRE(fsl_run_experiment("orthogonality", "{\"dims\":[3],\"n\":20}", dir.string().c_str(), nullptr) == FSL_OK);
  CHECK(std::filesystem::exists(dir / "report.json"));
  CHECK(std::filesystem::exists(dir / "orthogonality.csv"));
  std::filesystem::remove_all(dir);

  CHECK(fsl_set_workers(2) == FSL_OK);
  CHECK(fsl_set_workers(0) == FSL_OK);
}
