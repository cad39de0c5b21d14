#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "pase/common.hpp"
#include "pase/rng.hpp"

namespace pase::test {

inline std::vector<double> random_signal(Rng& rng, size_t n, double amp = 1.0) {
  std::vector<double> s(n);
  for (auto& v : s) v = rng.uniform(-amp, amp);
  return s;
}

template <class S>
Mat<S> random_mat(Rng& rng, int r, int c, double amp = 1.0) {
  Mat<S> m(r, c);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      m(i, j) = S(rng.uniform(-amp, amp));
  return m;
}

template <class S>
Vec<S> random_vec(Rng& rng, int n, double amp = 1.0) {
  Vec<S> v(n);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = S(rng.uniform(-amp, amp));
  return v;
}

inline double rel_err(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Central finite difference of a scalar loss w.r.t. one matrix entry.
inline double central_diff(Eigen::Ref<MatD> param, Eigen::Index i,
                           Eigen::Index j, double eps,
                           const std::function<double()>& loss) {
  const double saved = param(i, j);
  param(i, j) = saved + eps;
  const double up = loss();
  param(i, j) = saved - eps;
  const double down = loss();
  param(i, j) = saved;
  return (up - down) / (2 * eps);
}

/// Worst relative error between analytic gradient and central differences
/// over every entry of a parameter matrix.
inline double fd_check_mat(Eigen::Ref<MatD> param, const MatD& analytic,
                           double eps, const std::function<double()>& loss) {
  double worst = 0;
  for (Eigen::Index j = 0; j < param.cols(); ++j)
    for (Eigen::Index i = 0; i < param.rows(); ++i) {
      const double fd = central_diff(param, i, j, eps, loss);
      worst = std::max(worst, rel_err(fd, analytic(i, j)));
    }
  return worst;
}

/// Like central differencing, but refines across ReLU kinks by shrinking the
/// step until two scales agree; coordinates with a kink at the base point
/// itself return -1 (no usable slope estimate).
inline double kink_aware_err(Eigen::Ref<MatD> param, Eigen::Index i,
                             Eigen::Index j, double eps, double analytic,
                             const std::function<double()>& loss) {
  const double fd = central_diff(param, i, j, eps, loss);
  double err = rel_err(fd, analytic);
  if (err < 1e-5) return err;
  const double fd4 = central_diff(param, i, j, eps / 4, loss);
  const double fd16 = central_diff(param, i, j, eps / 16, loss);
  if (rel_err(fd4, fd16, 1e-6) > 1e-4) return -1.0;
  return std::min(err, rel_err(fd16, analytic));
}

}  // namespace pase::test
