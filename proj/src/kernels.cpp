#include "fewshot/kernels.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "fewshot/parallel.hpp"

namespace fewshot {

namespace {

void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    std::ostringstream msg;
    msg << what << ": dimension mismatch (" << a << " vs " << b << ")";
    throw Error(ErrorCode::InvalidArgument, msg.str());
  }
}

void require_kernel(const KernelSpec& spec, const FeatureCombination& c, const char* what) {
  if (!(spec == c.kernel())) {
    throw Error(ErrorCode::InvalidArgument,
                std::string(what) + ": combination was built for " + c.kernel().describe() +
                    ", not " + spec.describe());
  }
}

double self_kernel(const KernelSpec& spec, double sq_norm) {
  return spec.from_products(sq_norm, 0.0);
}

// Squared norms below zero by more than round-off indicate an invalid
// kernel or a broken combination.
double clamp_sq_norm(double value, double scale) {
  if (!std::isfinite(value)) throw Error(ErrorCode::Numeric, "non-finite squared feature-space norm (kernel overflow?)");
  if (value >= 0.0) return value;
  if (value >= -1e-9 * std::max(1.0, scale)) return 0.0;
  std::ostringstream msg;
  msg << "negative squared feature-space norm " << value << " (scale " << scale << ")";
  throw Error(ErrorCode::Numeric, msg.str());
}

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double out = 1.0;
  for (int i = 1; i <= k; ++i) out = out * (n - k + i) / i;
  return std::round(out);
}

void append_compositions(int dim, int total, std::vector<int>& prefix,
                         std::vector<std::vector<int>>& out) {
  const int slot = static_cast<int>(prefix.size());
  if (slot == dim - 1) {
    prefix.push_back(total);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  for (int first = total; first >= 0; --first) {
    prefix.push_back(first);
    append_compositions(dim, total - first, prefix, out);
    prefix.pop_back();
  }
}

}  // namespace

KernelSpec KernelSpec::linear(double bias) {
  if (!(bias >= 0.0) || !std::isfinite(bias))
    throw Error(ErrorCode::InvalidArgument, "kernel bias must be finite and >= 0");
  return {KernelKind::Linear, 1, bias, 0.0};
}

KernelSpec KernelSpec::polynomial(int degree, double bias) {
  if (degree < 1) throw Error(ErrorCode::InvalidArgument, "polynomial degree must be >= 1");
  if (!(bias >= 0.0) || !std::isfinite(bias))
    throw Error(ErrorCode::InvalidArgument, "kernel bias must be finite and >= 0");
  if (degree == 1) return linear(bias);
  return {KernelKind::Polynomial, degree, bias, 0.0};
}

KernelSpec KernelSpec::gaussian(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw Error(ErrorCode::InvalidArgument, "gaussian sigma must be finite and > 0");
  return {KernelKind::Gaussian, 0, 0.0, sigma};
}

double KernelSpec::from_products(double dot, double sq_dist) const {
  switch (kind_) {
    case KernelKind::Linear:
      return bias_ * bias_ + dot;
    case KernelKind::Polynomial: {
      const double base = bias_ * bias_ + dot;
      if (degree_ == 2) return base * base;
      return std::pow(base, degree_);
    }
    case KernelKind::Gaussian:
      return std::exp(-std::max(sq_dist, 0.0) / (2.0 * sigma_));
  }
  return 0.0;
}

std::string KernelSpec::describe() const {
  std::ostringstream out;
  switch (kind_) {
    case KernelKind::Linear:
      out << "linear(bias=" << bias_ << ")";
      break;
    case KernelKind::Polynomial:
      out << "polynomial(degree=" << degree_ << ", bias=" << bias_ << ")";
      break;
    case KernelKind::Gaussian:
      out << "gaussian(sigma=" << sigma_ << ")";
      break;
  }
  return out.str();
}

double eval_kernel(const KernelSpec& spec, DataVector x, DataVector y) {
  require_same_dim(x.size(), y.size(), "eval_kernel");
  if (x.empty()) throw Error(ErrorCode::InvalidArgument, "eval_kernel: empty data vector");
  double dot = 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot += x[i] * y[i];
    const double diff = x[i] - y[i];
    sq += diff * diff;
  }
  return spec.from_products(dot, sq);
}

Matrix cross_kernel(const KernelSpec& spec, const Matrix& a, const Matrix& b) {
  require_same_dim(static_cast<std::size_t>(a.cols()), static_cast<std::size_t>(b.cols()),
                   "cross_kernel");
  Matrix out = a * b.transpose();
  if (spec.kind() == KernelKind::Gaussian) {
    const Vector a_sq = a.rowwise().squaredNorm();
    const Vector b_sq = b.rowwise().squaredNorm();
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      for (Eigen::Index j = 0; j < out.cols(); ++j)
        out(i, j) = spec.from_products(0.0, a_sq(i) + b_sq(j) - 2.0 * out(i, j));
  } else {
    out = out.unaryExpr([&](double dot) { return spec.from_products(dot, 0.0); });
  }
  return out;
}

double GramMatrix::min_eigenvalue() const {
  Eigen::MatrixXd dense = entries_;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

GramMatrix gram_matrix(const KernelSpec& spec, const Matrix& points) {
  if (points.rows() == 0) throw Error(ErrorCode::InvalidArgument, "gram_matrix: empty point set");
  Matrix g = cross_kernel(spec, points, points);
  // Exact symmetry; the product above is only symmetric up to rounding.
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < g.cols(); ++j) g(j, i) = g(i, j);
    g(i, i) = self_kernel(spec, points.row(i).squaredNorm());
  }
  return GramMatrix(std::move(g));
}

FeatureCombination::FeatureCombination(KernelSpec spec, Matrix support, Vector weights)
    : spec_(spec), support_(std::move(support)), weights_(std::move(weights)) {
  if (support_.rows() == 0 || support_.cols() == 0)
    throw Error(ErrorCode::InvalidArgument, "feature combination needs a non-empty support");
  if (weights_.size() != support_.rows())
    throw Error(ErrorCode::InvalidArgument, "feature combination: weights and support differ in length");
  const Eigen::Index n = support_.rows();
  double self = 0.0;
  double scale = 0.0;
  if (n <= 256) {
    // Scalar path: bit-compatible with eval_kernel, so a singleton built
    // from y sits at exactly zero distance from phi(y).
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const double term = weights_(i) * weights_(j) * eval_kernel(spec_, row_view(support_, i), row_view(support_, j));
        self += term;
        scale += std::abs(term);
      }
    }
  } else {
    Vector weighted(n);
    Vector weighted_abs(n);
    const Vector abs_w = weights_.cwiseAbs();
    parallel_for(chunk_count(static_cast<std::size_t>(n)), [&](std::size_t chunk) {
      const auto begin = static_cast<Eigen::Index>(chunk * kChunkRows);
      const auto count = std::min<Eigen::Index>(static_cast<Eigen::Index>(kChunkRows), n - begin);
      const Matrix k = cross_kernel(spec_, support_.middleRows(begin, count), support_);
      weighted.segment(begin, count) = k * weights_;
      weighted_abs.segment(begin, count) = k.cwiseAbs() * abs_w;
    });
    self = weights_.dot(weighted);
    scale = abs_w.dot(weighted_abs);
  }
  self_inner_ = clamp_sq_norm(self, scale);
}

FeatureCombination FeatureCombination::mean(KernelSpec spec, Matrix support) {
  const auto n = support.rows();
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "feature combination needs a non-empty support");
  Vector w = Vector::Constant(n, 1.0 / static_cast<double>(n));
  return {spec, std::move(support), std::move(w)};
}

FeatureCombination FeatureCombination::singleton(KernelSpec spec, DataVector x) {
  Matrix support(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) support(0, static_cast<Eigen::Index>(i)) = x[i];
  return {spec, std::move(support), Vector::Ones(1)};
}

double FeatureCombination::inner_with(DataVector y) const {
  require_same_dim(y.size(), static_cast<std::size_t>(dim()), "inner_with");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < size(); ++i) sum += weights_(i) * eval_kernel(spec_, y, row_view(support_, i));
  return sum;
}

Vector FeatureCombination::inner_with_rows(const Matrix& points) const {
  require_same_dim(static_cast<std::size_t>(points.cols()), static_cast<std::size_t>(dim()),
                   "inner_with_rows");
  Vector out(points.rows());
  const std::size_t rows = static_cast<std::size_t>(points.rows());
  parallel_for(chunk_count(rows), [&](std::size_t chunk) {
    const auto begin = static_cast<Eigen::Index>(chunk * kChunkRows);
    const auto count = std::min<Eigen::Index>(static_cast<Eigen::Index>(kChunkRows), points.rows() - begin);
    const Matrix block = points.middleRows(begin, count);
    out.segment(begin, count) = cross_kernel(spec_, block, support_) * weights_;
  });
  return out;
}

double FeatureCombination::inner_with(const FeatureCombination& other) const {
  require_kernel(spec_, other, "inner_with");
  require_same_dim(static_cast<std::size_t>(dim()), static_cast<std::size_t>(other.dim()), "inner_with");
  if (size() * other.size() <= 256 * 256) {
    // Same summation order as the scalar self_inner(), so (c, c) computed
    // either way agrees bitwise.
    double sum = 0.0;
    for (Eigen::Index i = 0; i < size(); ++i)
      for (Eigen::Index j = 0; j < other.size(); ++j)
        sum += weights_(i) * other.weights_(j) *
               eval_kernel(spec_, row_view(support_, i), row_view(other.support_, j));
    return sum;
  }
  return weights_.dot(other.inner_with_rows(support_));
}

double centered_sq_norm(const KernelSpec& spec, DataVector y, const FeatureCombination& c) {
  require_kernel(spec, c, "centered_sq_norm");
  require_same_dim(y.size(), static_cast<std::size_t>(c.dim()), "centered_sq_norm");
  const double self = eval_kernel(spec, y, y);
  const double cross = c.inner_with(y);
  return clamp_sq_norm(self - 2.0 * cross + c.self_inner(),
                       std::abs(self) + 2.0 * std::abs(cross) + std::abs(c.self_inner()));
}

double centered_inner(const KernelSpec& spec, DataVector y, DataVector z,
                      const FeatureCombination& c) {
  require_kernel(spec, c, "centered_inner");
  require_same_dim(y.size(), z.size(), "centered_inner");
  require_same_dim(y.size(), static_cast<std::size_t>(c.dim()), "centered_inner");
  return eval_kernel(spec, y, z) - (c.inner_with(y) + c.inner_with(z)) + c.self_inner();
}

Vector centered_sq_norms(const KernelSpec& spec, const Matrix& points, const FeatureCombination& c) {
  require_kernel(spec, c, "centered_sq_norms");
  const Vector cross = c.inner_with_rows(points);
  Vector out(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double self = self_kernel(spec, points.row(i).squaredNorm());
    out(i) = clamp_sq_norm(self - 2.0 * cross(i) + c.self_inner(),
                           std::abs(self) + 2.0 * std::abs(cross(i)) + std::abs(c.self_inner()));
  }
  return out;
}

Vector centered_inners(const KernelSpec& spec, const Matrix& points, const FeatureCombination& v,
                       const FeatureCombination& c) {
  require_kernel(spec, c, "centered_inners");
  require_kernel(spec, v, "centered_inners");
  const Vector with_v = v.inner_with_rows(points);
  const Vector with_c = c.inner_with_rows(points);
  const double shift = c.self_inner() - c.inner_with(v);
  return (with_v - with_c).array() + shift;
}

PairStats combo_pair_stats(const KernelSpec& spec, const FeatureCombination& a,
                           const FeatureCombination& b) {
  require_kernel(spec, a, "combo_pair_stats");
  require_kernel(spec, b, "combo_pair_stats");
  const double ab = a.inner_with(b);
  const double sq = a.self_inner() - 2.0 * ab + b.self_inner();
  return {clamp_sq_norm(sq, std::abs(a.self_inner()) + 2.0 * std::abs(ab) + std::abs(b.self_inner())), ab};
}

std::vector<std::vector<int>> multi_indices(int dim, int degree) {
  if (dim < 1 || degree < 0) throw Error(ErrorCode::InvalidArgument, "multi_indices: need dim >= 1, degree >= 0");
  std::vector<std::vector<int>> out;
  std::vector<int> prefix;
  prefix.reserve(static_cast<std::size_t>(dim));
  for (int total = 0; total <= degree; ++total) append_compositions(dim, total, prefix, out);
  return out;
}

std::size_t monomial_count(int dim, int degree) {
  if (dim < 1 || degree < 0) throw Error(ErrorCode::InvalidArgument, "monomial_count: need dim >= 1, degree >= 0");
  // C(dim + degree, degree) built up as C(dim + i, i); each step is exact.
  unsigned __int128 count = 1;
  const unsigned __int128 cap = std::numeric_limits<std::size_t>::max();
  for (int i = 1; i <= degree; ++i) {
    count = count * static_cast<unsigned>(dim + i) / static_cast<unsigned>(i);
    if (count > cap) return std::numeric_limits<std::size_t>::max();
  }
  return static_cast<std::size_t>(count);
}

double poly_coefficient(const std::vector<int>& m, int degree, double bias) {
  int total = 0;
  for (int mi : m) total += mi;
  if (total > degree) return 0.0;
  double coeff = binomial(degree, degree - total) * std::pow(bias, 2 * (degree - total));
  int tail = total;
  for (int mi : m) {
    coeff *= binomial(tail, mi);
    tail -= mi;
  }
  return std::sqrt(coeff);
}

Vector poly_feature_map(DataVector x, int degree, double bias, std::size_t max_features) {
  if (degree < 1) throw Error(ErrorCode::InvalidArgument, "poly_feature_map: degree must be >= 1");
  if (x.empty()) throw Error(ErrorCode::InvalidArgument, "poly_feature_map: empty data vector");
  const int dim = static_cast<int>(x.size());
  const std::size_t count = monomial_count(dim, degree);
  if (count > max_features) {
    std::ostringstream msg;
    msg << "poly_feature_map: " << count << " features exceed the cap of " << max_features;
    throw Error(ErrorCode::InvalidArgument, msg.str());
  }
  const auto indices = multi_indices(dim, degree);
  Vector out(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    double monomial = 1.0;
    for (int t = 0; t < dim; ++t) {
      for (int p = 0; p < indices[i][static_cast<std::size_t>(t)]; ++p) monomial *= x[static_cast<std::size_t>(t)];
    }
    out(static_cast<Eigen::Index>(i)) = poly_coefficient(indices[i], degree, bias) * monomial;
  }
  return out;
}

}  // namespace fewshot
