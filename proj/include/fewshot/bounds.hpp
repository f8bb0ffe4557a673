#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fewshot/distributions.hpp"
#include "fewshot/kernels.hpp"

namespace fewshot {

/// Empirical CDF: F(t) = #{values <= t} / n. Right-continuous step function.
class StepCdf {
 public:
  StepCdf() = default;
  explicit StepCdf(std::vector<double> values);

  double operator()(double t) const;
  /// Same as operator() but with the strict count #{values < t} / n, i.e. the
  /// left limit F(t-).
  double left_limit(double t) const;
  /// Smallest knot x with F(x) >= q, q in (0, 1].
  double quantile(double q) const;

  const std::vector<double>& knots() const { return knots_; }
  std::size_t size() const { return knots_.size(); }
  double min() const { return knots_.front(); }
  double max() const { return knots_.back(); }

 private:
  std::vector<double> knots_;
};

/// Empirical versions of the projection, localisation and class separation
/// probability functions for a new class X and an old class Z.
struct ProbabilityFunctions {
  StepCdf projection;      ///< p(delta): (phi(x) - c_X, phi(y) - c_X) <= delta, x != y
  StepCdf localisation_x;  ///< lambda_X(r): |phi(x) - c_X| <= r
  StepCdf localisation_z;  ///< lambda_Z(r): |phi(z) - c_Z| <= r
  StepCdf separation_x;    ///< s_X(delta): (phi(x) - c_X, c_Z - c_X) <= delta
  StepCdf separation_z;    ///< s_Z(delta): (phi(z) - c_Z, c_X - c_Z) <= delta
};

/// Pairs are taken over distinct sample points. Each unordered pair is kept
/// once; the ordered-pair CDF is identical because the inner product is
/// symmetric. Requires |X| >= 2 and |Z| >= 1.
ProbabilityFunctions empirical_prob_functions(const KernelSpec& spec, const Sample& x_sample,
                                              const Sample& z_sample, const FeatureCombination& c_x,
                                              const FeatureCombination& c_z);

/// Required separation margin for points of the new class.
double eta_margin(double theta, double dist2, double a, double b, double gamma, double epsilon);
/// Required separation margin for points of the old classes.
double xi_margin(double theta, double dist2, double a, double beta, double gamma, double epsilon);

struct TradeoffParams {
  double theta = 0.0;
  double a = 0.0;
  double b = 0.0;
  double beta = 0.0;
  double gamma = 1.0;
  double epsilon = 1.0;
};

struct Bracket {
  double low = 0.0;
  double high = 1.0;
};

struct BoundReport {
  double lower = 0.0;
  double upper = 1.0;
  TradeoffParams argbest;
  std::size_t grid_size = 0;
  std::vector<std::string> heuristic_flags;
};

struct LearningBounds {
  BoundReport new_class;
  BoundReport old_class;
};

/// Candidate values for the free parameters. Bounds hold for every grid
/// point, so the maximum over any grid is valid.
struct BoundGrid {
  std::vector<double> a;
  std::vector<double> b;
  std::vector<double> beta;
  std::vector<double> gamma;
  std::vector<double> epsilon;

  /// `points` log-spaced values over [lo, hi] on every axis.
  static BoundGrid log_spaced(std::size_t points = 12, double lo = 1e-3, double hi = 1e3);
  /// log_spaced() with a, b, beta also seeded from deciles of the observed
  /// centered norms (a additionally from deciles / sqrt(k)).
  static BoundGrid seeded(const ProbabilityFunctions& pf, int k, std::size_t points = 12, double lo = 1e-3,
                          double hi = 1e3);

  /// Sorts and de-duplicates every axis.
  void normalise();
  std::size_t new_class_size() const { return a.size() * b.size() * gamma.size() * epsilon.size(); }
  std::size_t old_class_size() const { return a.size() * beta.size() * gamma.size() * epsilon.size(); }
};

/// a -> bracket on P(|mu - c_X| <= a).
using MeanConcentration = std::function<Bracket(double a)>;

/// Lower and upper bounds on P(F_new(x) = new) for x from the new class and
/// on P(F_new(z) = F(z)) for z from the old classes, maximised over the grid.
/// Ties between grid points go to the lexicographically smallest
/// (a, b|beta, gamma, epsilon).
LearningBounds learning_bounds(const ProbabilityFunctions& pf, double dist2, double theta,
                               const MeanConcentration& mean_conc, const BoundGrid& grid);

/// r(s, delta) = max(k s^2 - (k - 1) delta, 0)^(1/2).
double mean_radius(int k, double s, double delta);

/// Candidate deltas: quantiles of the pairwise projections, their left
/// neighbours (where p drops a step), and delta = s^2.
std::vector<double> default_delta_grid(const ProbabilityFunctions& pf, double s, std::size_t quantiles = 256);

/// Bracket on P(|mu - c_X| <= s) for the mean of k samples, optimised over
/// `delta_grid`. Clamped to [0, 1].
Bracket mean_convergence_bounds(int k, double s, const ProbabilityFunctions& pf,
                                std::span<const double> delta_grid);

/// learning_bounds with the mean concentration taken from
/// mean_convergence_bounds on default_delta_grid.
LearningBounds combined_bounds(int k, const ProbabilityFunctions& pf, double dist2, double theta,
                               const BoundGrid& grid);

/// Brackets on lambda, p and s from pre-image volume ratios of a
/// distribution whose density is at most A over the uniform level.
struct GeometricBrackets {
  Bracket localisation;
  Bracket projection;
  Bracket separation;
};

/// lambda(r) in [1 - A (1 - ratio), A ratio] with
/// ratio = V(c, min(r, r_X)) / V(c, r_X).
Bracket localisation_bracket(double A, double ball_ratio);
/// p(delta) from cap ratios C(c_X, phi(y), r_X, delta) / V(c_X, r_X) over
/// candidate points y: [1 - A max, A (1 - min)].
Bracket projection_bracket(double A, std::span<const double> cap_ratios);
/// s(delta) from the cap ratio towards the other class centre.
Bracket separation_bracket(double A, double cap_ratio);

GeometricBrackets geometric_brackets(double A, double ball_ratio, std::span<const double> projection_cap_ratios,
                                     double separation_cap_ratio);

}  // namespace fewshot
