#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fewshot/common.hpp"
#include "fewshot/distributions.hpp"
#include "fewshot/kernels.hpp"

namespace fewshot {

inline constexpr double kZ95 = 1.959963984540054;
inline constexpr double kZ99 = 2.5758293035489004;

struct ConfidenceInterval {
  double low;
  double high;
};

/// Wilson score interval for a binomial proportion.
ConfidenceInterval wilson_interval(std::size_t hits, std::size_t trials, double z = kZ95);

/// Monte-Carlo estimate of a pre-image volume ratio: hits out of trials
/// probe points, with a Wilson interval.
struct VolumeRatioEstimate {
  std::size_t hits = 0;
  std::size_t trials = 0;
  double ratio = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;

  static VolumeRatioEstimate from_counts(std::size_t hits, std::size_t trials, double z = kZ95);
};

/// Radius of the feature-space ball about c that holds a finite sample.
/// Always an underestimate of the true support radius.
struct RadiusEstimate {
  double radius = 0.0;
  bool sample_estimated = true;
};

RadiusEstimate enclosing_radius(const KernelSpec& spec, const FeatureCombination& c,
                                const Sample& support);

/// Fraction of probes with |phi(y) - c| <= eps * r.
VolumeRatioEstimate ball_ratio_mc(const KernelSpec& spec, const FeatureCombination& c,
                                  const Sample& probe, double r, double eps, double z = kZ95);

/// Fraction of probes with |phi(y) - c| <= r and (phi(y) - c, v - c) >= delta.
VolumeRatioEstimate cap_ratio_mc(const KernelSpec& spec, const FeatureCombination& c,
                                 DataVector v, const Sample& probe, double r, double delta,
                                 double z = kZ95);
/// Same with v an arbitrary feature-space combination (e.g. another class centre).
VolumeRatioEstimate cap_ratio_mc(const KernelSpec& spec, const FeatureCombination& c,
                                 const FeatureCombination& v, const Sample& probe, double r,
                                 double delta, double z = kZ95);

/// Sweeps reuse one pass of kernel evaluations over the probe set.
std::vector<VolumeRatioEstimate> ball_ratio_sweep(const KernelSpec& spec, const FeatureCombination& c,
                                                  const Sample& probe, double r,
                                                  std::span<const double> eps_grid, double z = kZ95);
std::vector<VolumeRatioEstimate> cap_ratio_sweep(const KernelSpec& spec, const FeatureCombination& c,
                                                 const FeatureCombination& v, const Sample& probe,
                                                 double r, std::span<const double> delta_grid,
                                                 double z = kZ95);

/// CSV with columns eps_or_delta,ratio,ci_low,ci_high,hits,trials. Reals are
/// written with 17 significant digits so the file parses back exactly.
std::string ratio_sweep_csv(std::span<const double> params,
                            std::span<const VolumeRatioEstimate> estimates);

struct OrthogonalityStats {
  double mean_abs_cos = 0.0;
  double std_cos = 0.0;
  double mean_norm = 0.0;
  double std_norm = 0.0;
  std::size_t pairs = 0;           ///< unordered pairs that entered the statistics
  std::size_t excluded_pairs = 0;  ///< pairs dropped for a zero centered norm
};

/// Normalised centered inner products between distinct sample points, with
/// the centre at the sample's own feature-space mean.
OrthogonalityStats orthogonality_stats(const KernelSpec& spec, const Sample& sample);

/// eps^d: exact ball ratio for the linear kernel.
double linear_ball_ratio(double eps, int dim);

/// max(eps^2 (1 + 1/delta) - 1/delta, 0)^(d/4): upper bound on the quadratic
/// kernel's ball ratio for the cube with L = 1/sqrt(3), b = 1, r^2 = (1 + delta) d.
double quadratic_ball_ratio_bound(double eps, double delta_shift, int dim);

/// Lebesgue volume of {x : |phi(x) - phi(y)| <= r} for the Gaussian kernel.
/// Returns +infinity when r^2 > 2 (the ball holds the whole image).
double gaussian_ball_preimage_volume(double r, double sigma, int dim);

/// |x - y|^2 bound equivalent to |phi(x) - phi(y)| <= r for r^2 <= 2.
double gaussian_preimage_sq_radius(double r, double sigma);

struct GaussianMeanNormLimits {
  double sigma_to_zero;
  double d_to_infinity;
};

/// Limits of |mu|^2 for k points under the Gaussian kernel.
GaussianMeanNormLimits gaussian_mean_norm_limits(int k, double sigma);

}  // namespace fewshot
