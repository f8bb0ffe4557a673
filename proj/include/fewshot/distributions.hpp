#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

#include "fewshot/common.hpp"

namespace fewshot {

struct DomainSpec {
  enum class Kind { UnitBall, Cube };

  Kind kind = Kind::UnitBall;
  int dim = 1;
  double half_width = 1.0;  ///< Cube only: support is [-L, L]^d

  static DomainSpec unit_ball(int dim) { return {Kind::UnitBall, dim, 1.0}; }
  static DomainSpec cube(int dim, double half_width) { return {Kind::Cube, dim, half_width}; }
};

/// n points drawn from a domain, one per row, with the seed that produced them.
struct Sample {
  Matrix points;
  std::uint64_t seed = 0;

  Eigen::Index size() const { return points.rows(); }
  Eigen::Index dim() const { return points.cols(); }
  DataVector row(Eigen::Index i) const { return row_view(points, i); }
};

/// Independent generator for substream `stream` of `root_seed`. Streams are
/// decorrelated by SplitMix64 finalisation of (root, stream).
std::mt19937_64 substream(std::uint64_t root_seed, std::uint64_t stream);

/// Derives a child seed, e.g. one per refit or per experiment cell.
std::uint64_t derive_seed(std::uint64_t root_seed, std::uint64_t stream);

/// Uniform in the closed unit ball: Gaussian direction, radius U^(1/d).
Sample sample_unit_ball(int dim, std::size_t n, std::uint64_t seed);

/// Uniform in the ball of the given radius about `centre`.
Sample sample_ball(DataVector centre, double radius, std::size_t n, std::uint64_t seed);

/// Uniform in [-L, L]^d.
Sample sample_cube(int dim, double half_width, std::size_t n, std::uint64_t seed);

Sample sample_domain(const DomainSpec& domain, std::size_t n, std::uint64_t seed);

/// E[x^m] for x uniform on [-L, L]^d: 0 if any exponent is odd, otherwise
/// L^|m| / prod(m_i + 1).
double cube_moment(std::span<const int> m, double half_width);

}  // namespace fewshot
