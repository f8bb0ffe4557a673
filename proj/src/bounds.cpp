#include "fewshot/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fewshot/parallel.hpp"

namespace fewshot {

namespace {

double positive_part(double v) { return v > 0.0 ? v : 0.0; }

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

void require_unit(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) {
    std::ostringstream msg;
    msg << what << " must lie in [0, 1], got " << v;
    throw Error(ErrorCode::InvalidArgument, msg.str());
  }
}

Bracket intersect_unit(double low, double high, const char* what, double A) {
  const Bracket out{std::max(low, 0.0), std::min(high, 1.0)};
  if (out.low > out.high) {
    std::ostringstream msg;
    msg << what << ": inverted bracket [" << out.low << ", " << out.high << "] for A = " << A;
    throw Error(ErrorCode::Numeric, msg.str());
  }
  return out;
}

void require_density_scale(double A) {
  if (!(A >= 1.0) || !std::isfinite(A))
    throw Error(ErrorCode::InvalidArgument, "density scale A must be finite and >= 1");
}

std::vector<double> sorted_unique(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::vector<double> deciles(const StepCdf& cdf) {
  std::vector<double> out;
  for (int i = 1; i <= 10; ++i) out.push_back(cdf.quantile(i / 10.0));
  return out;
}

struct Candidate {
  double value = -1.0;
  std::size_t index = 0;  // flat grid index; smaller is lexicographically smaller
};

}  // namespace

StepCdf::StepCdf(std::vector<double> values) : knots_(std::move(values)) {
  if (knots_.empty()) throw Error(ErrorCode::InvalidArgument, "empirical CDF needs at least one value");
  for (double v : knots_)
    if (std::isnan(v)) throw Error(ErrorCode::Numeric, "empirical CDF received NaN");
  std::sort(knots_.begin(), knots_.end());
}

double StepCdf::operator()(double t) const {
  const auto count = std::upper_bound(knots_.begin(), knots_.end(), t) - knots_.begin();
  return static_cast<double>(count) / static_cast<double>(knots_.size());
}

double StepCdf::left_limit(double t) const {
  const auto count = std::lower_bound(knots_.begin(), knots_.end(), t) - knots_.begin();
  return static_cast<double>(count) / static_cast<double>(knots_.size());
}

double StepCdf::quantile(double q) const {
  if (!(q > 0.0 && q <= 1.0)) throw Error(ErrorCode::InvalidArgument, "quantile level must lie in (0, 1]");
  const auto n = static_cast<double>(knots_.size());
  auto rank = static_cast<std::size_t>(std::ceil(q * n));
  rank = std::clamp<std::size_t>(rank, 1, knots_.size());
  return knots_[rank - 1];
}

ProbabilityFunctions empirical_prob_functions(const KernelSpec& spec, const Sample& x_sample,
                                              const Sample& z_sample, const FeatureCombination& c_x,
                                              const FeatureCombination& c_z) {
  const Eigen::Index n = x_sample.size();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "projection probability needs at least two new-class points");
  if (z_sample.size() < 1) throw Error(ErrorCode::InvalidArgument, "old-class sample is empty");

  ProbabilityFunctions pf;
  pf.localisation_x = StepCdf(to_std(centered_sq_norms(spec, x_sample.points, c_x).cwiseSqrt()));
  pf.localisation_z = StepCdf(to_std(centered_sq_norms(spec, z_sample.points, c_z).cwiseSqrt()));
  pf.separation_x = StepCdf(to_std(centered_inners(spec, x_sample.points, c_z, c_x)));
  pf.separation_z = StepCdf(to_std(centered_inners(spec, z_sample.points, c_x, c_z)));

  // (phi(x_i) - c, phi(x_j) - c) = k(x_i, x_j) - (phi(x_i), c) - (phi(x_j), c) + (c, c)
  const Vector with_c = c_x.inner_with_rows(x_sample.points);
  const double cc = c_x.self_inner();
  const auto rows = static_cast<std::size_t>(n);
  std::vector<std::vector<double>> per_chunk(chunk_count(rows));
  parallel_for(per_chunk.size(), [&](std::size_t chunk) {
    const auto begin = static_cast<Eigen::Index>(chunk * kChunkRows);
    const auto count = std::min<Eigen::Index>(static_cast<Eigen::Index>(kChunkRows), n - begin);
    const Matrix k = cross_kernel(spec, x_sample.points.middleRows(begin, count), x_sample.points);
    auto& out = per_chunk[chunk];
    for (Eigen::Index i = 0; i < count; ++i) {
      const Eigen::Index gi = begin + i;
      for (Eigen::Index j = gi + 1; j < n; ++j) out.push_back(k(i, j) - with_c(gi) - with_c(j) + cc);
    }
  });
  std::vector<double> pairs;
  pairs.reserve(rows * (rows - 1) / 2);
  for (const auto& part : per_chunk) pairs.insert(pairs.end(), part.begin(), part.end());
  pf.projection = StepCdf(std::move(pairs));
  return pf;
}

double eta_margin(double theta, double dist2, double a, double b, double gamma, double epsilon) {
  if (!(gamma > 0.0) || !(epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma and epsilon must be > 0");
  return -theta - dist2 / (2.0 * gamma) - (epsilon + gamma + 2.0) / 2.0 * a * a - b * b / (2.0 * epsilon);
}

double xi_margin(double theta, double dist2, double a, double beta, double gamma, double epsilon) {
  if (!(gamma > 0.0) || !(epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma and epsilon must be > 0");
  return theta + (1.0 - 1.0 / gamma) * dist2 - (epsilon + gamma - 2.0) / 2.0 * a * a -
         beta * beta / (2.0 * epsilon);
}

BoundGrid BoundGrid::log_spaced(std::size_t points, double lo, double hi) {
  if (points == 0 || !(lo > 0.0) || !(hi >= lo))
    throw Error(ErrorCode::InvalidArgument, "log-spaced grid needs points >= 1 and 0 < lo <= hi");
  std::vector<double> axis(points);
  for (std::size_t i = 0; i < points; ++i) {
    const double t = points == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(points - 1);
    axis[i] = lo * std::pow(hi / lo, t);
  }
  return {axis, axis, axis, axis, axis};
}

BoundGrid BoundGrid::seeded(const ProbabilityFunctions& pf, int k, std::size_t points, double lo, double hi) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  BoundGrid grid = log_spaced(points, lo, hi);
  const auto norms_x = deciles(pf.localisation_x);
  const auto norms_z = deciles(pf.localisation_z);
  const double shrink = 1.0 / std::sqrt(static_cast<double>(k));
  for (double v : norms_x) {
    if (v > 0.0) {
      grid.b.push_back(v);
      grid.a.push_back(v);
      grid.a.push_back(v * shrink);
    }
  }
  for (double v : norms_z)
    if (v > 0.0) grid.beta.push_back(v);
  grid.normalise();
  return grid;
}

void BoundGrid::normalise() {
  for (auto* axis : {&a, &b, &beta, &gamma, &epsilon}) *axis = sorted_unique(std::move(*axis));
}

LearningBounds learning_bounds(const ProbabilityFunctions& pf, double dist2, double theta,
                               const MeanConcentration& mean_conc, const BoundGrid& grid_in) {
  BoundGrid grid = grid_in;
  grid.normalise();
  if (grid.a.empty() || grid.b.empty() || grid.beta.empty() || grid.gamma.empty() || grid.epsilon.empty())
    throw Error(ErrorCode::InvalidArgument, "every parameter grid axis must be non-empty");
  for (const auto* axis : {&grid.a, &grid.b, &grid.beta})
    if (axis->front() < 0.0) throw Error(ErrorCode::InvalidArgument, "a, b and beta must be >= 0");
  for (const auto* axis : {&grid.gamma, &grid.epsilon})
    if (!(axis->front() > 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma and epsilon must be > 0");
  if (!(dist2 >= 0.0)) throw Error(ErrorCode::InvalidArgument, "squared centre distance must be >= 0");

  std::vector<Bracket> conc(grid.a.size());
  for (std::size_t i = 0; i < grid.a.size(); ++i) {
    conc[i] = mean_conc(grid.a[i]);
    require_unit(conc[i].low, "mean concentration lower bound");
    require_unit(conc[i].high, "mean concentration upper bound");
    if (conc[i].low > conc[i].high) throw Error(ErrorCode::InvalidArgument, "mean concentration bracket is inverted");
    if (i > 0 && (conc[i].low < conc[i - 1].low || conc[i].high < conc[i - 1].high))
      throw Error(ErrorCode::InvalidArgument, "mean concentration must be non-decreasing in a");
  }

  const std::size_t ng = grid.gamma.size();
  const std::size_t ne = grid.epsilon.size();

  // One task per value of a; each returns its best (lower) and worst
  // (upper) candidates for both classes. Reduction runs in a-order with a
  // strict comparison so the first (lexicographically smallest) tuple wins.
  struct PerA {
    Candidate new_low, new_up, old_low, old_up;
  };
  std::vector<PerA> per_a(grid.a.size());
  parallel_for(grid.a.size(), [&](std::size_t ia) {
    const double a = grid.a[ia];
    const Bracket mc = conc[ia];
    PerA best;
    const std::size_t nb = grid.b.size();
    const std::size_t nbeta = grid.beta.size();
    for (std::size_t ib = 0; ib < nb; ++ib) {
      const double lam = pf.localisation_x(grid.b[ib]);
      for (std::size_t ig = 0; ig < ng; ++ig) {
        for (std::size_t ie = 0; ie < ne; ++ie) {
          const double eta = eta_margin(theta, dist2, a, grid.b[ib], grid.gamma[ig], grid.epsilon[ie]);
          const double s = pf.separation_x(eta);
          const std::size_t flat = ((ia * nb + ib) * ng + ig) * ne + ie;
          const double low = mc.low * positive_part(lam + s - 1.0);
          const double up = (1.0 - mc.high) * positive_part(1.0 - lam - s);
          if (low > best.new_low.value) best.new_low = {low, flat};
          if (up > best.new_up.value) best.new_up = {up, flat};
        }
      }
    }
    for (std::size_t ib = 0; ib < nbeta; ++ib) {
      const double lam = pf.localisation_z(grid.beta[ib]);
      for (std::size_t ig = 0; ig < ng; ++ig) {
        for (std::size_t ie = 0; ie < ne; ++ie) {
          const double xi = xi_margin(theta, dist2, a, grid.beta[ib], grid.gamma[ig], grid.epsilon[ie]);
          const double s = pf.separation_z(xi);
          const std::size_t flat = ((ia * nbeta + ib) * ng + ig) * ne + ie;
          const double low = mc.low * positive_part(lam + s - 1.0);
          const double up = (1.0 - mc.high) * positive_part(1.0 - lam - s);
          if (low > best.old_low.value) best.old_low = {low, flat};
          if (up > best.old_up.value) best.old_up = {up, flat};
        }
      }
    }
    per_a[ia] = best;
  });

  PerA total;
  for (const auto& p : per_a) {
    if (p.new_low.value > total.new_low.value) total.new_low = p.new_low;
    if (p.new_up.value > total.new_up.value) total.new_up = p.new_up;
    if (p.old_low.value > total.old_low.value) total.old_low = p.old_low;
    if (p.old_up.value > total.old_up.value) total.old_up = p.old_up;
  }

  auto unflatten = [&](std::size_t flat, std::size_t n_loc, bool old_class) {
    TradeoffParams p;
    p.theta = theta;
    p.epsilon = grid.epsilon[flat % ne];
    flat /= ne;
    p.gamma = grid.gamma[flat % ng];
    flat /= ng;
    const std::size_t il = flat % n_loc;
    (old_class ? p.beta : p.b) = (old_class ? grid.beta : grid.b)[il];
    p.a = grid.a[flat / n_loc];
    return p;
  };

  auto finish = [&](const Candidate& low, const Candidate& up, std::size_t n_loc, bool old_class,
                    std::size_t size) {
    BoundReport r;
    r.lower = std::clamp(low.value, 0.0, 1.0);
    r.upper = std::clamp(1.0 - up.value, 0.0, 1.0);
    r.argbest = unflatten(low.index, n_loc, old_class);
    r.grid_size = size;
    if (r.lower > r.upper) {
      std::ostringstream msg;
      msg << (old_class ? "old-class" : "new-class") << " bounds inverted: lower " << r.lower << " > upper "
          << r.upper << " at theta = " << theta;
      throw Error(ErrorCode::Numeric, msg.str());
    }
    return r;
  };

  LearningBounds out;
  out.new_class = finish(total.new_low, total.new_up, grid.b.size(), false, grid.new_class_size());
  out.old_class = finish(total.old_low, total.old_up, grid.beta.size(), true, grid.old_class_size());
  return out;
}

double mean_radius(int k, double s, double delta) {
  const double kk = static_cast<double>(k);
  return std::sqrt(positive_part(kk * s * s - (kk - 1.0) * delta));
}

std::vector<double> default_delta_grid(const ProbabilityFunctions& pf, double s, std::size_t quantiles) {
  if (quantiles == 0) throw Error(ErrorCode::InvalidArgument, "delta grid needs at least one quantile");
  const auto& proj = pf.projection;
  std::vector<double> grid;
  grid.reserve(2 * quantiles + 3);
  const double below = -std::numeric_limits<double>::infinity();
  grid.push_back(std::nextafter(proj.min(), below));
  for (std::size_t i = 1; i <= quantiles; ++i) {
    const double knot = proj.quantile(static_cast<double>(i) / static_cast<double>(quantiles));
    grid.push_back(knot);
    grid.push_back(std::nextafter(knot, below));
  }
  grid.push_back(s * s);
  return sorted_unique(std::move(grid));
}

Bracket mean_convergence_bounds(int k, double s, const ProbabilityFunctions& pf,
                                std::span<const double> delta_grid) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  if (!(s > 0.0)) throw Error(ErrorCode::InvalidArgument, "s must be > 0");
  if (delta_grid.empty()) throw Error(ErrorCode::InvalidArgument, "delta grid is empty");
  const double kk = static_cast<double>(k);
  const double pairs = kk * (kk - 1.0);
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  for (double delta : delta_grid) {
    const double lam = pf.localisation_x(mean_radius(k, s, delta));
    const double p = k > 1 ? pf.projection(delta) : 0.0;
    lower = std::max(lower, 1.0 - (kk * (1.0 - lam) + pairs * (1.0 - p)));
    upper = std::min(upper, kk * lam + pairs * p);
  }
  return {std::clamp(lower, 0.0, 1.0), std::clamp(upper, 0.0, 1.0)};
}

LearningBounds combined_bounds(int k, const ProbabilityFunctions& pf, double dist2, double theta,
                               const BoundGrid& grid) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  const std::vector<double> base = default_delta_grid(pf, 1.0);
  MeanConcentration conc = [&](double a) {
    std::vector<double> deltas = base;
    deltas.push_back(a * a);
    return mean_convergence_bounds(k, a, pf, deltas);
  };
  return learning_bounds(pf, dist2, theta, conc, grid);
}

Bracket localisation_bracket(double A, double ball_ratio) {
  require_density_scale(A);
  require_unit(ball_ratio, "ball volume ratio");
  // 1 - A (1 - ratio), written so that A == 1 reproduces the ratio exactly.
  return intersect_unit(A * ball_ratio - (A - 1.0), A * ball_ratio, "localisation bracket", A);
}

Bracket projection_bracket(double A, std::span<const double> cap_ratios) {
  require_density_scale(A);
  if (cap_ratios.empty()) throw Error(ErrorCode::InvalidArgument, "projection bracket needs at least one cap ratio");
  for (double r : cap_ratios) require_unit(r, "cap volume ratio");
  const auto [lo, hi] = std::minmax_element(cap_ratios.begin(), cap_ratios.end());
  return intersect_unit(A * (1.0 - *hi) - (A - 1.0), A * (1.0 - *lo), "projection bracket", A);
}

Bracket separation_bracket(double A, double cap_ratio) {
  require_density_scale(A);
  require_unit(cap_ratio, "cap volume ratio");
  return intersect_unit(A * (1.0 - cap_ratio) - (A - 1.0), A * (1.0 - cap_ratio), "separation bracket", A);
}

GeometricBrackets geometric_brackets(double A, double ball_ratio, std::span<const double> projection_cap_ratios,
                                     double separation_cap_ratio) {
  return {localisation_bracket(A, ball_ratio), projection_bracket(A, projection_cap_ratios),
          separation_bracket(A, separation_cap_ratio)};
}

}  // namespace fewshot
