#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace pase {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using MatF = Mat<float>;
using MatD = Mat<double>;
using VecF = Vec<float>;
using VecD = Vec<double>;

/// Errors map onto CLI exit codes: UsageError -> 1, DataError -> 2,
/// NumericError -> 3.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};
struct UsageError : Error {
  explicit UsageError(const std::string& msg) : Error(msg) {}
};
struct DataError : Error {
  explicit DataError(const std::string& msg) : Error(msg) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

template <class Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

inline int conv_extent(int in, int pad, int kernel, int stride) {
  const int span = in + 2 * pad - kernel;
  if (span < 0) return 0;  // floor semantics for undersized inputs
  return span / stride + 1;
}

}  // namespace pase
