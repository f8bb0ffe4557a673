#include "fewshot/distributions.hpp"

#include <cmath>
#include <string>

#include "fewshot/parallel.hpp"

namespace fewshot {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void check_shape(int dim, std::size_t n) {
  if (dim < 1) throw Error(ErrorCode::InvalidArgument, "sample dimension must be >= 1");
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "sample size must be >= 1");
}

// Fills rows chunk by chunk, each chunk from its own substream, so the
// output does not depend on how chunks are scheduled.
template <typename RowFn>
Matrix fill_rows(int dim, std::size_t n, std::uint64_t seed, RowFn&& fill_row) {
  Matrix points(static_cast<Eigen::Index>(n), dim);
  parallel_for(chunk_count(n), [&](std::size_t chunk) {
    auto gen = substream(seed, chunk);
    const std::size_t end = std::min(n, (chunk + 1) * kChunkRows);
    for (std::size_t i = chunk * kChunkRows; i < end; ++i)
      fill_row(gen, points.row(static_cast<Eigen::Index>(i)));
  });
  return points;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root_seed, std::uint64_t stream) {
  return splitmix64(splitmix64(root_seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

std::mt19937_64 substream(std::uint64_t root_seed, std::uint64_t stream) {
  return std::mt19937_64(derive_seed(root_seed, stream));
}

Sample sample_unit_ball(int dim, std::size_t n, std::uint64_t seed) {
  check_shape(dim, n);
  auto points = fill_rows(dim, n, seed, [dim](std::mt19937_64& gen, auto row) {
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> uniform;
    double norm = 0.0;
    do {
      for (int j = 0; j < dim; ++j) row(j) = normal(gen);
      norm = row.norm();
    } while (norm == 0.0);
    const double radius = std::pow(uniform(gen), 1.0 / dim);
    row *= radius / norm;
  });
  return {std::move(points), seed};
}

Sample sample_ball(DataVector centre, double radius, std::size_t n, std::uint64_t seed) {
  if (!(radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "ball radius must be > 0");
  Sample s = sample_unit_ball(static_cast<int>(centre.size()), n, seed);
  s.points *= radius;
  s.points.rowwise() += as_eigen(centre).transpose();
  return s;
}

Sample sample_cube(int dim, double half_width, std::size_t n, std::uint64_t seed) {
  check_shape(dim, n);
  if (!(half_width > 0.0)) throw Error(ErrorCode::InvalidArgument, "cube half-width must be > 0");
  auto points = fill_rows(dim, n, seed, [dim, half_width](std::mt19937_64& gen, auto row) {
    std::uniform_real_distribution<double> uniform(-half_width, half_width);
    for (int j = 0; j < dim; ++j) row(j) = uniform(gen);
  });
  return {std::move(points), seed};
}

Sample sample_domain(const DomainSpec& domain, std::size_t n, std::uint64_t seed) {
  switch (domain.kind) {
    case DomainSpec::Kind::UnitBall:
      return sample_unit_ball(domain.dim, n, seed);
    case DomainSpec::Kind::Cube:
      return sample_cube(domain.dim, domain.half_width, n, seed);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown domain");
}

double cube_moment(std::span<const int> m, double half_width) {
  int total = 0;
  double denom = 1.0;
  for (int mi : m) {
    if (mi < 0) throw Error(ErrorCode::InvalidArgument, "multi-index entries must be >= 0");
    if (mi % 2 != 0) return 0.0;
    total += mi;
    denom *= mi + 1;
  }
  return std::pow(half_width, total) / denom;
}

}  // namespace fewshot
