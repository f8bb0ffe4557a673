#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace fewshot {

/// Row-major point matrix: one data vector per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using DataVector = std::span<const double>;

enum class ErrorCode {
  InvalidArgument = 1,
  Config = 2,
  InputData = 3,
  Numeric = 4,
  Io = 5,
};

/// The library's single exception type. The code is what the C API and the
/// CLI exit status are derived from.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline DataVector row_view(const Matrix& m, Eigen::Index i) {
  return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

inline DataVector as_data(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

inline Eigen::Map<const Vector> as_eigen(DataVector v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

}  // namespace fewshot
