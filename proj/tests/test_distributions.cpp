#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fewshot/distributions.hpp"
#include "fewshot/parallel.hpp"

using namespace fewshot;

namespace {

// Kolmogorov-Smirnov statistic of `values` against the continuous CDF `cdf`.
template <class Cdf>
double ks_statistic(std::vector<double> values, Cdf cdf) {
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double f = cdf(values[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

// 0.1% critical value of the KS statistic.
double ks_critical(std::size_t n) { return 1.95 / std::sqrt(static_cast<double>(n)); }

}  // namespace

TEST_CASE("unit-ball radii follow P(|x| <= t) = t^d") {
  for (int d : {1, 3, 10}) {
    const std::size_t n = 20000;
    const Sample s = sample_unit_ball(d, n, 77 + static_cast<std::uint64_t>(d));
    REQUIRE(s.size() == static_cast<Eigen::Index>(n));
    REQUIRE(s.dim() == d);
    std::vector<double> radii;
    for (Eigen::Index i = 0; i < s.size(); ++i) radii.push_back(s.points.row(i).norm());
    CHECK(*std::max_element(radii.begin(), radii.end()) <= 1.0);
    CHECK(ks_statistic(radii, [d](double t) { return std::pow(t, d); }) < ks_critical(n));
  }
}

TEST_CASE("unit-ball directions are isotropic") {
  const int d = 4;
  const std::size_t n = 40000;
  const Sample s = sample_unit_ball(d, n, 9);
  // Each coordinate has mean 0 and variance 1 / (d + 2).
  const double var = 1.0 / (d + 2);
  for (int j = 0; j < d; ++j) {
    const double mean = s.points.col(j).mean();
    CHECK(std::abs(mean) < 4.0 * std::sqrt(var / n));
    const double second = s.points.col(j).squaredNorm() / n;
    CHECK(second == doctest::Approx(var).epsilon(0.03));
  }
}

TEST_CASE("cube samples stay in range and match the moment formula") {
  const double L = 0.7;
  const Sample s = sample_cube(3, L, 50000, 21);
  CHECK(s.points.maxCoeff() <= L);
  CHECK(s.points.minCoeff() >= -L);
  const std::vector<std::vector<int>> exps = {{2, 0, 0}, {2, 2, 0}, {4, 0, 0}, {1, 0, 0}, {2, 1, 0}};
  for (const auto& m : exps) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      double term = 1.0;
      for (int j = 0; j < 3; ++j) term *= std::pow(s.points(i, j), m[static_cast<std::size_t>(j)]);
      acc += term;
    }
    const double mc = acc / s.size();
    CHECK(std::abs(mc - cube_moment(m, L)) < 0.005);
  }
  // E[x^2] = L^2 / 3, E[x^4] = L^4 / 5.
  const int two[] = {2};
  const int four[] = {4};
  const int odd[] = {3, 2};
  CHECK(cube_moment(two, L) == doctest::Approx(L * L / 3.0));
  CHECK(cube_moment(four, L) == doctest::Approx(std::pow(L, 4) / 5.0));
  CHECK(cube_moment(odd, L) == 0.0);
}

TEST_CASE("ball sampling translates and scales the unit ball") {
  const std::vector<double> centre{3.0, -1.0};
  const Sample s = sample_ball(centre, 0.5, 5000, 4);
  const Sample u = sample_unit_ball(2, 5000, 4);
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    CHECK(s.points(i, 0) == doctest::Approx(3.0 + 0.5 * u.points(i, 0)));
    CHECK(s.points(i, 1) == doctest::Approx(-1.0 + 0.5 * u.points(i, 1)));
  }
}

TEST_CASE("sampling is reproducible and independent of worker count") {
  set_worker_count(1);
  const Sample a = sample_unit_ball(5, 10000, 123);
  const Sample c = sample_cube(5, 1.0, 10000, 123);
  set_worker_count(4);
  const Sample b = sample_unit_ball(5, 10000, 123);
  const Sample d = sample_cube(5, 1.0, 10000, 123);
  set_worker_count(0);
  CHECK((a.points.array() == b.points.array()).all());
  CHECK((c.points.array() == d.points.array()).all());
  CHECK(a.seed == 123);

  const Sample other = sample_unit_ball(5, 10000, 124);
  CHECK((a.points.array() != other.points.array()).any());
  // A prefix of a larger sample equals the smaller sample within one chunk.
  const Sample small = sample_unit_ball(5, 100, 123);
  CHECK((small.points.array() == a.points.topRows(100).array()).all());
}

TEST_CASE("derived seeds and substreams are distinct") {
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 0; s < 1000; ++s) seeds.push_back(derive_seed(42, s));
  std::sort(seeds.begin(), seeds.end());
  CHECK(std::adjacent_find(seeds.begin(), seeds.end()) == seeds.end());
  CHECK(derive_seed(1, 0) != derive_seed(0, 1));
  auto g1 = substream(5, 0);
  auto g2 = substream(5, 1);
  auto g3 = substream(5, 0);
  const auto v1 = g1();
  CHECK(v1 != g2());
  CHECK(v1 == g3());
}

TEST_CASE("sampling rejects invalid parameters") {
  CHECK_THROWS_AS(sample_unit_ball(0, 10, 1), Error);
  CHECK_THROWS_AS(sample_unit_ball(2, 0, 1), Error);
  CHECK_THROWS_AS(sample_cube(2, 0.0, 10, 1), Error);
  const std::vector<double> c{0.0};
  CHECK_THROWS_AS(sample_ball(c, -1.0, 10, 1), Error);
  const int bad[] = {-1};
  CHECK_THROWS_AS(cube_moment(bad, 1.0), Error);
}
