#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "fewshot/kernels.hpp"
#include "fewshot/parallel.hpp"
#include "oracles.hpp"

using namespace fewshot;
using oracle::Vec;

namespace {

DataVector span_of(const Vec& v) { return {v.data(), v.size()}; }

Matrix to_matrix(const std::vector<Vec>& rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

Vector to_vector(const Vec& v) { return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())); }

}  // namespace

TEST_CASE("kernel values at hand-computed points") {
  const Vec x{1.0, 2.0};
  const Vec y{3.0, -1.0};
  CHECK(eval_kernel(KernelSpec::linear(), span_of(x), span_of(y)) == doctest::Approx(1.0));
  CHECK(eval_kernel(KernelSpec::linear(2.0), span_of(x), span_of(y)) == doctest::Approx(5.0));
  CHECK(eval_kernel(KernelSpec::polynomial(2, 1.0), span_of(x), span_of(y)) == doctest::Approx(4.0));
  CHECK(eval_kernel(KernelSpec::polynomial(3, 0.0), span_of(x), span_of(y)) == doctest::Approx(1.0));
  // |x - y|^2 = 4 + 9 = 13; the bandwidth divides 2 sigma, not 2 sigma^2.
  CHECK(eval_kernel(KernelSpec::gaussian(0.5), span_of(x), span_of(y)) == doctest::Approx(std::exp(-13.0)));
  CHECK(eval_kernel(KernelSpec::gaussian(2.0), span_of(x), span_of(y)) == doctest::Approx(std::exp(-13.0 / 4.0)));
  CHECK(eval_kernel(KernelSpec::gaussian(1.0), span_of(x), span_of(x)) == 1.0);
}

TEST_CASE("degree one polynomial is the linear kernel") {
  const KernelSpec p = KernelSpec::polynomial(1, 1.5);
  CHECK(p.kind() == KernelKind::Linear);
  CHECK(p == KernelSpec::linear(1.5));
}

TEST_CASE("invalid kernel parameters are rejected") {
  CHECK_THROWS_AS(KernelSpec::polynomial(0, 1.0), Error);
  CHECK_THROWS_AS(KernelSpec::polynomial(2, -1.0), Error);
  CHECK_THROWS_AS(KernelSpec::gaussian(0.0), Error);
  CHECK_THROWS_AS(KernelSpec::gaussian(std::nan("")), Error);
  CHECK_THROWS_AS(KernelSpec::linear(std::numeric_limits<double>::infinity()), Error);
  const Vec a{1.0, 2.0};
  const Vec b{1.0};
  try {
    eval_kernel(KernelSpec::linear(), span_of(a), span_of(b));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidArgument);
  }
}

TEST_CASE("batched kernels agree with scalar evaluation") {
  std::mt19937_64 rng(11);
  const std::vector<KernelSpec> specs = {KernelSpec::linear(0.3), KernelSpec::polynomial(3, 1.0),
                                         KernelSpec::gaussian(0.7)};
  std::vector<Vec> a, b;
  for (int i = 0; i < 7; ++i) a.push_back(oracle::random_vec(rng, 5));
  for (int i = 0; i < 4; ++i) b.push_back(oracle::random_vec(rng, 5));
  for (const auto& spec : specs) {
    const Matrix k = cross_kernel(spec, to_matrix(a), to_matrix(b));
    const GramMatrix g = gram_matrix(spec, to_matrix(a));
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = 0; j < b.size(); ++j)
        CHECK(k(i, j) == doctest::Approx(eval_kernel(spec, span_of(a[i]), span_of(b[j]))).epsilon(1e-12));
      for (std::size_t j = 0; j < a.size(); ++j) {
        CHECK(g(i, j) == g(j, i));
        CHECK(g(i, j) == doctest::Approx(eval_kernel(spec, span_of(a[i]), span_of(a[j]))).epsilon(1e-12));
      }
    }
    CHECK(g.min_eigenvalue() > -1e-9);
  }
}

TEST_CASE("Gaussian Gram matrix of a large sample is positive semi-definite") {
  std::mt19937_64 rng(3);
  std::vector<Vec> rows;
  for (int i = 0; i < 120; ++i) rows.push_back(oracle::random_vec(rng, 3));
  CHECK(gram_matrix(KernelSpec::gaussian(0.3), to_matrix(rows)).min_eigenvalue() > -1e-9);
  CHECK(gram_matrix(KernelSpec::polynomial(4, 1.0), to_matrix(rows)).min_eigenvalue() > -1e-7);
}

TEST_CASE("multi-indices are graded, descending within a degree, and complete") {
  const auto m = multi_indices(2, 2);
  const std::vector<std::vector<int>> expected = {{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
  CHECK(m == expected);

  for (int d = 1; d <= 4; ++d) {
    for (int k = 1; k <= 4; ++k) {
      const auto idx = multi_indices(d, k);
      // C(d + k, k)
      double count = 1.0;
      for (int i = 1; i <= k; ++i) count = count * (d + i) / i;
      CHECK(idx.size() == static_cast<std::size_t>(std::llround(count)));
      CHECK(monomial_count(d, k) == idx.size());
      std::set<std::vector<int>> unique(idx.begin(), idx.end());
      CHECK(unique.size() == idx.size());
      for (std::size_t i = 1; i < idx.size(); ++i) {
        const int prev = std::accumulate(idx[i - 1].begin(), idx[i - 1].end(), 0);
        const int cur = std::accumulate(idx[i].begin(), idx[i].end(), 0);
        CHECK(prev <= cur);
        if (prev == cur) CHECK(idx[i - 1] > idx[i]);
      }
    }
  }
}

TEST_CASE("monomial count saturates instead of overflowing") {
  CHECK(monomial_count(1000000, 50) == std::numeric_limits<std::size_t>::max());
  CHECK(monomial_count(100, 5) == 96560646u);
}

TEST_CASE("feature-map coefficients match the multinomial expansion") {
  // alpha(m)^2 = k! / ((k - |m|)! prod m_t!) * b^(2 (k - |m|))
  for (double bias : {0.5, 1.0, 2.0}) {
    for (int k = 1; k <= 4; ++k) {
      for (const auto& m : multi_indices(3, k)) {
        int total = 0;
        double denom = 1.0;
        for (int e : m) {
          total += e;
          denom *= oracle::factorial(e);
        }
        const double sq = oracle::factorial(k) / (oracle::factorial(k - total) * denom) *
                          std::pow(bias, 2.0 * (k - total));
        CHECK(poly_coefficient(m, k, bias) == doctest::Approx(std::sqrt(sq)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("explicit feature map reproduces the polynomial kernel") {
  SUBCASE("length for d = 2, degree 2") {
    const Vec x{0.3, -0.4};
    CHECK(poly_feature_map(span_of(x), 2, 1.0).size() == 6);
  }
  SUBCASE("zero input keeps only the constant term") {
    const Vec zero(4, 0.0);
    const Vector f = poly_feature_map(span_of(zero), 3, 1.0);
    CHECK(f(0) == 1.0);
    CHECK(f.tail(f.size() - 1).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("dot products equal (b^2 + x.y)^k") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      const Vec x = oracle::random_vec(rng, 3);
      const Vec y = oracle::random_vec(rng, 3);
      const double want = std::pow(1.0 + oracle::dot(x, y), 3);
      CHECK(poly_feature_map(span_of(x), 3, 1.0).dot(poly_feature_map(span_of(y), 3, 1.0)) ==
            doctest::Approx(want).epsilon(1e-10));
    }
  }
  SUBCASE("zero bias drops lower-degree terms") {
    const Vec x{0.5, 2.0};
    const Vector f = poly_feature_map(span_of(x), 2, 0.0);
    CHECK(f.head(3).cwiseAbs().maxCoeff() == 0.0);
    CHECK(f.squaredNorm() == doctest::Approx(std::pow(oracle::dot(x, x), 2)));
  }
  SUBCASE("feature count cap") {
    const Vec x(100, 0.1);
    try {
      poly_feature_map(span_of(x), 5, 1.0);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidArgument);
    }
    CHECK(poly_feature_map(span_of(x), 2, 1.0, 5151).size() == 5151);
    CHECK_THROWS_AS(poly_feature_map(span_of(x), 2, 1.0, 5150), Error);
  }
}

TEST_CASE("kernel-trick quantities match explicit tensor features") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim_pick(1, 4), deg_pick(1, 3), n_pick(1, 6);
  std::uniform_real_distribution<double> bias_pick(0.0, 2.0), w_pick(-1.0, 1.5);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = dim_pick(rng);
    const int deg = deg_pick(rng);
    const double bias = bias_pick(rng);
    const KernelSpec spec = KernelSpec::polynomial(deg, bias);
    const int n = n_pick(rng);
    std::vector<Vec> support, feats;
    Vec w;
    for (int i = 0; i < n; ++i) {
      support.push_back(oracle::random_vec(rng, static_cast<std::size_t>(d)));
      feats.push_back(oracle::tensor_features(support.back(), deg, bias));
      w.push_back(w_pick(rng));
    }
    const FeatureCombination c(spec, to_matrix(support), to_vector(w));
    const Vec c_feat = oracle::combine(feats, w);
    CHECK(c.self_inner() == doctest::Approx(oracle::dot(c_feat, c_feat)).epsilon(1e-12).scale(1.0));

    const Vec y = oracle::random_vec(rng, static_cast<std::size_t>(d));
    const Vec z = oracle::random_vec(rng, static_cast<std::size_t>(d));
    const Vec yc = oracle::minus(oracle::tensor_features(y, deg, bias), c_feat);
    const Vec zc = oracle::minus(oracle::tensor_features(z, deg, bias), c_feat);
    CHECK(std::abs(centered_sq_norm(spec, span_of(y), c) - oracle::dot(yc, yc)) < 1e-9);
    CHECK(std::abs(centered_inner(spec, span_of(y), span_of(z), c) - oracle::dot(yc, zc)) < 1e-9);

    const FeatureCombination v = FeatureCombination::mean(spec, to_matrix({z, y}));
    const Vec v_feat = oracle::combine({oracle::tensor_features(z, deg, bias), oracle::tensor_features(y, deg, bias)},
                                       {0.5, 0.5});
    const Vector batched = centered_inners(spec, to_matrix({y}), v, c);
    CHECK(std::abs(batched(0) - oracle::dot(yc, oracle::minus(v_feat, c_feat))) < 1e-9);

    const PairStats ps = combo_pair_stats(spec, c, v);
    const Vec diff = oracle::minus(c_feat, v_feat);
    CHECK(std::abs(ps.sq_distance - oracle::dot(diff, diff)) < 1e-9);
    CHECK(std::abs(ps.inner - oracle::dot(c_feat, v_feat)) < 1e-9);
  }
}

TEST_CASE("Gaussian singleton distance is 2 - 2 k(x, y)") {
  std::mt19937_64 rng(8);
  const KernelSpec spec = KernelSpec::gaussian(0.8);
  for (int i = 0; i < 20; ++i) {
    const Vec x = oracle::random_vec(rng, 4);
    const Vec y = oracle::random_vec(rng, 4);
    const auto ps = combo_pair_stats(spec, FeatureCombination::singleton(spec, span_of(x)),
                                     FeatureCombination::singleton(spec, span_of(y)));
    CHECK(ps.sq_distance == doctest::Approx(2.0 - 2.0 * oracle::gaussian(x, y, 0.8)).epsilon(1e-12));
  }
}

TEST_CASE("identical combinations and points give exact zeros") {
  std::mt19937_64 rng(4);
  std::vector<Vec> rows;
  for (int i = 0; i < 9; ++i) rows.push_back(oracle::random_vec(rng, 3));
  for (const auto& spec : {KernelSpec::linear(), KernelSpec::polynomial(3, 1.0), KernelSpec::gaussian(0.5)}) {
    const FeatureCombination a = FeatureCombination::mean(spec, to_matrix(rows));
    const FeatureCombination b = FeatureCombination::mean(spec, to_matrix(rows));
    CHECK(combo_pair_stats(spec, a, b).sq_distance == 0.0);
    const FeatureCombination s = FeatureCombination::singleton(spec, span_of(rows[2]));
    CHECK(centered_sq_norm(spec, span_of(rows[2]), s) == 0.0);
    CHECK(centered_sq_norm(spec, span_of(rows[3]), s) > 0.0);
  }
}

TEST_CASE("large supports use the chunked path and agree with direct sums") {
  std::mt19937_64 rng(6);
  const KernelSpec spec = KernelSpec::gaussian(1.0);
  std::vector<Vec> rows;
  for (int i = 0; i < 600; ++i) rows.push_back(oracle::random_vec(rng, 3));
  const FeatureCombination c = FeatureCombination::mean(spec, to_matrix(rows));
  double self = 0.0;
  for (const auto& a : rows)
    for (const auto& b : rows) self += oracle::gaussian(a, b, 1.0);
  self /= 600.0 * 600.0;
  CHECK(c.self_inner() == doctest::Approx(self).epsilon(1e-12));

  std::vector<Vec> probes;
  for (int i = 0; i < 50; ++i) probes.push_back(oracle::random_vec(rng, 3));
  const Vector with_rows = c.inner_with_rows(to_matrix(probes));
  const Vector norms = centered_sq_norms(spec, to_matrix(probes), c);
  for (std::size_t i = 0; i < probes.size(); ++i) {
    double cross = 0.0;
    for (const auto& a : rows) cross += oracle::gaussian(probes[i], a, 1.0);
    cross /= 600.0;
    CHECK(with_rows(static_cast<Eigen::Index>(i)) == doctest::Approx(cross).epsilon(1e-12));
    CHECK(norms(static_cast<Eigen::Index>(i)) == doctest::Approx(1.0 - 2.0 * cross + self).epsilon(1e-10));
  }
}

TEST_CASE("batched results do not depend on the worker count") {
  std::mt19937_64 rng(10);
  std::vector<Vec> rows;
  for (int i = 0; i < 9000; ++i) rows.push_back(oracle::random_vec(rng, 4));
  const Matrix pts = to_matrix(rows);
  const KernelSpec spec = KernelSpec::polynomial(2, 1.0);
  const FeatureCombination c = FeatureCombination::mean(spec, pts.topRows(300));
  set_worker_count(1);
  const Vector one = centered_sq_norms(spec, pts, c);
  set_worker_count(3);
  const Vector three = centered_sq_norms(spec, pts, c);
  set_worker_count(0);
  CHECK((one.array() == three.array()).all());
}

TEST_CASE("combinations validate their inputs") {
  const KernelSpec spec = KernelSpec::linear();
  CHECK_THROWS_AS(FeatureCombination::mean(spec, Matrix(0, 3)), Error);
  CHECK_THROWS_AS(FeatureCombination(spec, Matrix::Zero(2, 3), Vector::Ones(3)), Error);
  const FeatureCombination c = FeatureCombination::mean(spec, Matrix::Zero(2, 3));
  const Vec wrong{1.0, 2.0};
  CHECK_THROWS_AS(centered_sq_norm(spec, span_of(wrong), c), Error);
  const Vec ok{1.0, 2.0, 3.0};
  CHECK_THROWS_AS(centered_sq_norm(KernelSpec::gaussian(1.0), span_of(ok), c), Error);
}

TEST_CASE("kernel overflow is reported as a numeric failure") {
  const KernelSpec spec = KernelSpec::polynomial(60, 10.0);
  const Vec big(3, 1e3);
  const FeatureCombination c = FeatureCombination::singleton(spec, span_of(Vec(3, 0.0)));
  try {
    centered_sq_norm(spec, span_of(big), c);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Numeric);
  }
}
