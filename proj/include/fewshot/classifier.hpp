#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fewshot/kernels.hpp"

namespace fewshot {

/// Prototype classifier for one new class: x is assigned the new label when
/// (phi(x) - mu, mu - c_Z) >= theta, where mu is the feature-space mean of
/// the k shots and c_Z the old-class centre. Otherwise the existing
/// classifier's answer is kept. Immutable after fitting.
class FewShotModel {
 public:
  FewShotModel(KernelSpec spec, FeatureCombination mu, FeatureCombination c_z);

  const KernelSpec& kernel() const { return spec_; }
  const FeatureCombination& mu() const { return mu_; }
  const FeatureCombination& old_centre() const { return c_z_; }
  const Matrix& shots() const { return mu_.support(); }
  Eigen::Index shot_count() const { return mu_.size(); }
  /// |mu - c_Z|^2.
  double dist2() const { return dist2_; }

  /// (phi(x) - mu, mu - c_Z).
  double decision_value(DataVector x) const;
  /// decision_value for every row, evaluated in parallel.
  Vector decision_values(const Matrix& points) const;

  bool is_new_class(DataVector x, double theta) const { return decision_value(x) >= theta; }

 private:
  KernelSpec spec_;
  FeatureCombination mu_;
  FeatureCombination c_z_;
  double dist2_;
  double mu_sq_;  ///< (mu, mu)
  double mu_cz_;  ///< (mu, c_Z)
};

FewShotModel fit_few_shot(const KernelSpec& spec, const Matrix& shots, FeatureCombination c_z);

/// Returns new_label when the decision value reaches theta (inclusive),
/// fallback otherwise.
template <typename Label>
Label classify(const FewShotModel& model, DataVector x, double theta, const Label& new_label,
               const Label& fallback) {
  return model.is_new_class(x, theta) ? new_label : fallback;
}

struct RocPoint {
  double fpr;
  double tpr;
};

/// Step ROC curve swept over every distinct score plus +/- infinity.
/// thresholds[i] is the theta that produced points[i]; thresholds descend,
/// both rates are non-decreasing.
struct RocCurve {
  std::vector<RocPoint> points;
  std::vector<double> thresholds;
};

RocCurve roc_curve(std::span<const double> pos_scores, std::span<const double> neg_scores);

/// Trapezoidal area under the curve.
double auroc(const RocCurve& curve);

/// CSV with columns threshold,fpr,tpr.
std::string roc_csv(const RocCurve& curve);

/// Translation by the old-class mean followed by division by the largest
/// translated norm over both training tables.
struct NormalizationTransform {
  Vector mean;
  double scale = 1.0;

  Matrix apply(const Matrix& rows) const;
};

struct NormalizedTables {
  Matrix old_rows;
  Matrix new_rows;
  NormalizationTransform transform;
};

NormalizedTables normalize_feature_table(const Matrix& old_rows, const Matrix& new_rows);

}  // namespace fewshot
