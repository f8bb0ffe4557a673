#include "fewshot/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iterator>
#include <cstdio>
#include <limits>
#include <sstream>

#include "fewshot/parallel.hpp"

namespace fewshot {

FewShotModel::FewShotModel(KernelSpec spec, FeatureCombination mu, FeatureCombination c_z)
    : spec_(spec), mu_(std::move(mu)), c_z_(std::move(c_z)) {
  if (!(mu_.kernel() == spec_) || !(c_z_.kernel() == spec_))
    throw Error(ErrorCode::InvalidArgument, "few-shot model: combinations use a different kernel");
  if (mu_.dim() != c_z_.dim())
    throw Error(ErrorCode::InvalidArgument, "few-shot model: shots and old-class centre differ in dimension");
  const PairStats stats = combo_pair_stats(spec_, mu_, c_z_);
  dist2_ = stats.sq_distance;
  mu_cz_ = stats.inner;
  mu_sq_ = mu_.self_inner();
}

double FewShotModel::decision_value(DataVector x) const {
  // (phi(x), mu) - (phi(x), c_Z) - (mu, mu) + (mu, c_Z), grouped so that
  // x equal to a single shot yields exactly zero.
  return (mu_.inner_with(x) - mu_sq_) - (c_z_.inner_with(x) - mu_cz_);
}

Vector FewShotModel::decision_values(const Matrix& points) const {
  if (points.cols() != mu_.dim())
    throw Error(ErrorCode::InvalidArgument, "decision_values: dimension mismatch");
  const Vector with_mu = mu_.inner_with_rows(points);
  const Vector with_cz = c_z_.inner_with_rows(points);
  return (with_mu.array() - mu_sq_) - (with_cz.array() - mu_cz_);
}

FewShotModel fit_few_shot(const KernelSpec& spec, const Matrix& shots, FeatureCombination c_z) {
  if (shots.rows() == 0) throw Error(ErrorCode::InvalidArgument, "fit_few_shot: no shots");
  return {spec, FeatureCombination::mean(spec, shots), std::move(c_z)};
}

RocCurve roc_curve(std::span<const double> pos_scores, std::span<const double> neg_scores) {
  if (pos_scores.empty() || neg_scores.empty())
    throw Error(ErrorCode::InvalidArgument, "roc_curve: both score lists must be non-empty");
  std::vector<double> pos(pos_scores.begin(), pos_scores.end());
  std::vector<double> neg(neg_scores.begin(), neg_scores.end());
  for (double v : pos)
    if (std::isnan(v)) throw Error(ErrorCode::Numeric, "roc_curve: NaN score");
  for (double v : neg)
    if (std::isnan(v)) throw Error(ErrorCode::Numeric, "roc_curve: NaN score");
  std::sort(pos.begin(), pos.end(), std::greater<>());
  std::sort(neg.begin(), neg.end(), std::greater<>());

  std::vector<double> thresholds;
  thresholds.reserve(pos.size() + neg.size());
  std::merge(pos.begin(), pos.end(), neg.begin(), neg.end(), std::back_inserter(thresholds), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  const double inf = std::numeric_limits<double>::infinity();
  const double np = static_cast<double>(pos.size());
  const double nn = static_cast<double>(neg.size());

  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  curve.thresholds.push_back(inf);
  std::size_t ip = 0;
  std::size_t in = 0;
  for (double t : thresholds) {
    while (ip < pos.size() && pos[ip] >= t) ++ip;
    while (in < neg.size() && neg[in] >= t) ++in;
    curve.points.push_back({static_cast<double>(in) / nn, static_cast<double>(ip) / np});
    curve.thresholds.push_back(t);
  }
  curve.points.push_back({1.0, 1.0});
  curve.thresholds.push_back(-inf);
  return curve;
}

double auroc(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& p = curve.points[i - 1];
    const auto& q = curve.points[i];
    area += (q.fpr - p.fpr) * (q.tpr + p.tpr) / 2.0;
  }
  return std::clamp(area, 0.0, 1.0);
}

std::string roc_csv(const RocCurve& curve) {
  std::ostringstream out;
  out << "threshold,fpr,tpr\n";
  char buf[128];
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", curve.thresholds[i], curve.points[i].fpr,
                  curve.points[i].tpr);
    out << buf;
  }
  return out.str();
}

Matrix NormalizationTransform::apply(const Matrix& rows) const {
  if (rows.cols() != mean.size()) throw Error(ErrorCode::InputData, "normalisation: feature width mismatch");
  Matrix out = rows.rowwise() - mean.transpose();
  out /= scale;
  return out;
}

NormalizedTables normalize_feature_table(const Matrix& old_rows, const Matrix& new_rows) {
  if (old_rows.rows() == 0) throw Error(ErrorCode::InputData, "normalisation: old-class table is empty");
  if (new_rows.rows() > 0 && new_rows.cols() != old_rows.cols())
    throw Error(ErrorCode::InputData, "normalisation: tables differ in feature width");

  NormalizationTransform transform;
  transform.mean = old_rows.colwise().mean().transpose();
  Matrix old_t = old_rows.rowwise() - transform.mean.transpose();
  Matrix new_t = new_rows.rowwise() - transform.mean.transpose();
  double max_norm = old_t.rowwise().norm().maxCoeff();
  if (new_t.rows() > 0) max_norm = std::max(max_norm, new_t.rowwise().norm().maxCoeff());
  if (!(max_norm > 0.0))
    throw Error(ErrorCode::InputData, "normalisation: every row coincides with the old-class mean");
  transform.scale = max_norm;
  old_t /= max_norm;
  new_t /= max_norm;
  return {std::move(old_t), std::move(new_t), std::move(transform)};
}

}  // namespace fewshot
