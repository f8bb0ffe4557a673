#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fewshot/common.hpp"

namespace fewshot {

enum class KernelKind { Linear, Polynomial, Gaussian };

/// Describes the feature map phi implicitly through its kernel.
///
///   Linear      (b^2 + x.y)
///   Polynomial  (b^2 + x.y)^degree
///   Gaussian    exp(-|x - y|^2 / (2 sigma))
///
/// Linear is the degree-1 polynomial kernel and reports degree() == 1.
class KernelSpec {
 public:
  static KernelSpec linear(double bias = 0.0);
  static KernelSpec polynomial(int degree, double bias);
  static KernelSpec gaussian(double sigma);

  KernelKind kind() const { return kind_; }
  int degree() const { return degree_; }
  double bias() const { return bias_; }
  double sigma() const { return sigma_; }

  /// Kernel value from the dot product x.y and squared distance |x - y|^2.
  /// Only the quantity relevant to the kernel family is read.
  double from_products(double dot, double sq_dist) const;

  /// Human readable form, e.g. "polynomial(degree=2, bias=1)".
  std::string describe() const;

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;

 private:
  KernelSpec(KernelKind kind, int degree, double bias, double sigma)
      : kind_(kind), degree_(degree), bias_(bias), sigma_(sigma) {}

  KernelKind kind_;
  int degree_;
  double bias_;
  double sigma_;
};

/// kappa(x, y). Throws Error(InvalidArgument) on dimension mismatch.
double eval_kernel(const KernelSpec& spec, DataVector x, DataVector y);

/// Matrix of kappa(a_i, b_j) computed through one matrix product.
Matrix cross_kernel(const KernelSpec& spec, const Matrix& a, const Matrix& b);

/// Symmetric Gram matrix of a point set.
class GramMatrix {
 public:
  explicit GramMatrix(Matrix entries) : entries_(std::move(entries)) {}

  const Matrix& entries() const { return entries_; }
  Eigen::Index size() const { return entries_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }
  double min_eigenvalue() const;

 private:
  Matrix entries_;
};

GramMatrix gram_matrix(const KernelSpec& spec, const Matrix& points);

/// A feature-space point c = sum_i w_i phi(x_i), kept implicit through its
/// support points. The double sum (c, c) is evaluated once at construction.
/// Immutable after construction.
class FeatureCombination {
 public:
  FeatureCombination(KernelSpec spec, Matrix support, Vector weights);

  /// Empirical mean: weights 1/n over the rows of `support`.
  static FeatureCombination mean(KernelSpec spec, Matrix support);
  /// phi(x) itself.
  static FeatureCombination singleton(KernelSpec spec, DataVector x);

  const KernelSpec& kernel() const { return spec_; }
  const Matrix& support() const { return support_; }
  const Vector& weights() const { return weights_; }
  Eigen::Index size() const { return support_.rows(); }
  Eigen::Index dim() const { return support_.cols(); }

  /// (c, c).
  double self_inner() const { return self_inner_; }
  /// (phi(y), c).
  double inner_with(DataVector y) const;
  /// (phi(y_r), c) for every row of `points`.
  Vector inner_with_rows(const Matrix& points) const;
  /// (c, other).
  double inner_with(const FeatureCombination& other) const;

 private:
  KernelSpec spec_;
  Matrix support_;
  Vector weights_;
  double self_inner_;
};

/// |phi(y) - c|^2 by the kernel trick. Small negative round-off is clamped
/// to zero; anything clearly negative raises Error(Numeric).
double centered_sq_norm(const KernelSpec& spec, DataVector y, const FeatureCombination& c);

/// (phi(y) - c, phi(z) - c).
double centered_inner(const KernelSpec& spec, DataVector y, DataVector z,
                      const FeatureCombination& c);

/// Batched forms over the rows of `points`.
Vector centered_sq_norms(const KernelSpec& spec, const Matrix& points,
                         const FeatureCombination& c);
/// (phi(y_r) - c, v - c) for every row y_r.
Vector centered_inners(const KernelSpec& spec, const Matrix& points, const FeatureCombination& v,
                       const FeatureCombination& c);

struct PairStats {
  double sq_distance;  ///< |A - B|^2, clamped at zero
  double inner;        ///< (A, B)
};

PairStats combo_pair_stats(const KernelSpec& spec, const FeatureCombination& a,
                           const FeatureCombination& b);

/// Multi-indices m with |m| <= degree in d variables, graded by total degree
/// and, within a degree, in descending lexicographic order of the exponent
/// tuple (x1^2 before x1*x2 before x2^2).
std::vector<std::vector<int>> multi_indices(int dim, int degree);

/// Number of monomials of total degree <= degree in dim variables,
/// C(dim + degree, degree). Saturates at SIZE_MAX.
std::size_t monomial_count(int dim, int degree);

/// Coefficient alpha(m) of the explicit polynomial feature map.
double poly_coefficient(const std::vector<int>& m, int degree, double bias);

inline constexpr std::size_t kDefaultFeatureCap = 1'000'000;

/// Explicit feature map of the polynomial kernel; entries follow
/// multi_indices(). dot(phi(x), phi(y)) == (bias^2 + x.y)^degree.
Vector poly_feature_map(DataVector x, int degree, double bias,
                        std::size_t max_features = kDefaultFeatureCap);

}  // namespace fewshot
