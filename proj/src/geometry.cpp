#include "fewshot/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace fewshot {

namespace {

void check_radius(double r) {
  if (!(r > 0.0) || !std::isfinite(r)) throw Error(ErrorCode::InvalidArgument, "ball radius must be finite and > 0");
}

void check_eps(double eps) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw Error(ErrorCode::InvalidArgument, "eps must lie in [0, 1]");
}

Vector centered_norms(const KernelSpec& spec, const Matrix& points, const FeatureCombination& c) {
  return centered_sq_norms(spec, points, c).cwiseSqrt();
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ConfidenceInterval wilson_interval(std::size_t hits, std::size_t trials, double z) {
  if (trials == 0) throw Error(ErrorCode::InvalidArgument, "wilson_interval: no trials");
  if (hits > trials) throw Error(ErrorCode::InvalidArgument, "wilson_interval: hits exceed trials");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(hits) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::clamp(std::min(centre - half, p), 0.0, 1.0), std::clamp(std::max(centre + half, p), 0.0, 1.0)};
}

VolumeRatioEstimate VolumeRatioEstimate::from_counts(std::size_t hits, std::size_t trials, double z) {
  const auto ci = wilson_interval(hits, trials, z);
  return {hits, trials, static_cast<double>(hits) / static_cast<double>(trials), ci.low, ci.high};
}

RadiusEstimate enclosing_radius(const KernelSpec& spec, const FeatureCombination& c, const Sample& support) {
  if (support.size() == 0) throw Error(ErrorCode::InvalidArgument, "enclosing_radius: empty support");
  return {centered_norms(spec, support.points, c).maxCoeff(), true};
}

VolumeRatioEstimate ball_ratio_mc(const KernelSpec& spec, const FeatureCombination& c, const Sample& probe,
                                  double r, double eps, double z) {
  const double grid[] = {eps};
  return ball_ratio_sweep(spec, c, probe, r, grid, z).front();
}

VolumeRatioEstimate cap_ratio_mc(const KernelSpec& spec, const FeatureCombination& c, DataVector v,
                                 const Sample& probe, double r, double delta, double z) {
  return cap_ratio_mc(spec, c, FeatureCombination::singleton(spec, v), probe, r, delta, z);
}

VolumeRatioEstimate cap_ratio_mc(const KernelSpec& spec, const FeatureCombination& c,
                                 const FeatureCombination& v, const Sample& probe, double r, double delta,
                                 double z) {
  const double grid[] = {delta};
  return cap_ratio_sweep(spec, c, v, probe, r, grid, z).front();
}

std::vector<VolumeRatioEstimate> ball_ratio_sweep(const KernelSpec& spec, const FeatureCombination& c,
                                                  const Sample& probe, double r,
                                                  std::span<const double> eps_grid, double z) {
  check_radius(r);
  for (double eps : eps_grid) check_eps(eps);
  if (probe.size() == 0) throw Error(ErrorCode::InvalidArgument, "ball_ratio: empty probe sample");

  const Vector norms = centered_norms(spec, probe.points, c);
  const auto trials = static_cast<std::size_t>(norms.size());
  std::vector<VolumeRatioEstimate> out;
  out.reserve(eps_grid.size());
  for (double eps : eps_grid) {
    const double bound = eps * r;
    const auto hits = static_cast<std::size_t>((norms.array() <= bound).count());
    out.push_back(VolumeRatioEstimate::from_counts(hits, trials, z));
  }
  return out;
}

std::vector<VolumeRatioEstimate> cap_ratio_sweep(const KernelSpec& spec, const FeatureCombination& c,
                                                 const FeatureCombination& v, const Sample& probe, double r,
                                                 std::span<const double> delta_grid, double z) {
  check_radius(r);
  if (probe.size() == 0) throw Error(ErrorCode::InvalidArgument, "cap_ratio: empty probe sample");

  const Vector norms = centered_norms(spec, probe.points, c);
  const Vector inners = centered_inners(spec, probe.points, v, c);
  std::vector<double> inside;
  inside.reserve(static_cast<std::size_t>(norms.size()));
  for (Eigen::Index i = 0; i < norms.size(); ++i)
    if (norms(i) <= r) inside.push_back(inners(i));
  std::sort(inside.begin(), inside.end());

  const auto trials = static_cast<std::size_t>(norms.size());
  std::vector<VolumeRatioEstimate> out;
  out.reserve(delta_grid.size());
  for (double delta : delta_grid) {
    const auto first = std::lower_bound(inside.begin(), inside.end(), delta);
    out.push_back(VolumeRatioEstimate::from_counts(static_cast<std::size_t>(inside.end() - first), trials, z));
  }
  return out;
}

std::string ratio_sweep_csv(std::span<const double> params, std::span<const VolumeRatioEstimate> estimates) {
  if (params.size() != estimates.size())
    throw Error(ErrorCode::InvalidArgument, "ratio_sweep_csv: parameter and estimate counts differ");
  std::ostringstream out;
  out << "eps_or_delta,ratio,ci_low,ci_high,hits,trials\n";
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = estimates[i];
    out << format_real(params[i]) << ',' << format_real(e.ratio) << ',' << format_real(e.ci_low) << ','
        << format_real(e.ci_high) << ',' << e.hits << ',' << e.trials << '\n';
  }
  return out.str();
}

OrthogonalityStats orthogonality_stats(const KernelSpec& spec, const Sample& sample) {
  const Eigen::Index n = sample.size();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "orthogonality_stats: need at least two points");

  const Matrix g = gram_matrix(spec, sample.points).entries();
  const Vector row_mean = g.rowwise().mean();
  const double total_mean = row_mean.mean();

  // Centered Gram entries (phi(x_i) - mu, phi(x_j) - mu).
  auto centered = [&](Eigen::Index i, Eigen::Index j) {
    return g(i, j) - row_mean(i) - row_mean(j) + total_mean;
  };

  Vector norms(n);
  std::vector<bool> degenerate(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sq = centered(i, i);
    const double tol = 1e-12 * std::max(1.0, std::abs(g(i, i)));
    degenerate[static_cast<std::size_t>(i)] = sq <= tol;
    norms(i) = std::sqrt(std::max(sq, 0.0));
  }

  OrthogonalityStats stats;
  stats.mean_norm = norms.mean();
  stats.std_norm = std::sqrt((norms.array() - stats.mean_norm).square().mean());

  double sum_abs = 0.0;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (degenerate[static_cast<std::size_t>(i)] || degenerate[static_cast<std::size_t>(j)]) {
        ++stats.excluded_pairs;
        continue;
      }
      const double cos = std::clamp(centered(i, j) / (norms(i) * norms(j)), -1.0, 1.0);
      sum_abs += std::abs(cos);
      sum += cos;
      sum_sq += cos * cos;
      ++stats.pairs;
    }
  }
  if (stats.pairs > 0) {
    const double m = static_cast<double>(stats.pairs);
    stats.mean_abs_cos = sum_abs / m;
    const double mean_cos = sum / m;
    stats.std_cos = std::sqrt(std::max(sum_sq / m - mean_cos * mean_cos, 0.0));
  }
  return stats;
}

double linear_ball_ratio(double eps, int dim) {
  check_eps(eps);
  if (dim < 1) throw Error(ErrorCode::InvalidArgument, "dimension must be >= 1");
  return std::pow(eps, dim);
}

double quadratic_ball_ratio_bound(double eps, double delta_shift, int dim) {
  check_eps(eps);
  if (!(delta_shift > 0.0)) throw Error(ErrorCode::InvalidArgument, "delta_shift must be > 0");
  if (dim < 1) throw Error(ErrorCode::InvalidArgument, "dimension must be >= 1");
  const double inv = 1.0 / delta_shift;
  const double base = eps * eps * (1.0 + inv) - inv;
  return std::pow(std::max(base, 0.0), dim / 4.0);
}

double gaussian_preimage_sq_radius(double r, double sigma) {
  if (!(r >= 0.0)) throw Error(ErrorCode::InvalidArgument, "radius must be >= 0");
  if (!(sigma > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma must be > 0");
  if (r * r >= 2.0) return std::numeric_limits<double>::infinity();
  return -2.0 * sigma * std::log1p(-0.5 * r * r);
}

double gaussian_ball_preimage_volume(double r, double sigma, int dim) {
  if (dim < 1) throw Error(ErrorCode::InvalidArgument, "dimension must be >= 1");
  const double sq_radius = gaussian_preimage_sq_radius(r, sigma);
  if (r == 0.0) return 0.0;
  if (std::isinf(sq_radius)) return sq_radius;
  const double half_d = 0.5 * dim;
  // pi^(d/2) / Gamma(d/2 + 1) * rho^d, in log space for large d.
  return std::exp(half_d * std::log(M_PI) - std::lgamma(half_d + 1.0) + half_d * std::log(sq_radius));
}

GaussianMeanNormLimits gaussian_mean_norm_limits(int k, double sigma) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  if (!(sigma > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma must be > 0");
  const double inv_k = 1.0 / k;
  return {inv_k, inv_k + (1.0 - inv_k) * std::exp(-1.0 / sigma)};
}

}  // namespace fewshot
