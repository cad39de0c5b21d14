#pragma once

#include <vector>

#include "pase/common.hpp"
#include "pase/rng.hpp"

namespace pase {

/// Which time steps of a feature sequence get replaced by the learnable fill
/// vector. Exactly round(ratio * T) steps are selected, uniformly without
/// replacement, reproducibly from the supplied stream.
struct MaskPlan {
  std::vector<bool> mask;
  double ratio = 0;

  size_t count() const {
    size_t n = 0;
    for (bool b : mask) n += b;
    return n;
  }
};

inline MaskPlan make_mask_plan(Eigen::Index t_len, double ratio, Rng rng) {
  if (ratio < 0 || ratio >= 1) throw UsageError("mask ratio must be in [0, 1)");
  MaskPlan plan;
  plan.ratio = ratio;
  plan.mask.assign(size_t(t_len), false);
  const auto k = size_t(std::lround(ratio * double(t_len)));
  // Partial Fisher-Yates over index slots.
  std::vector<Eigen::Index> idx(static_cast<size_t>(t_len));
  for (Eigen::Index i = 0; i < t_len; ++i) idx[size_t(i)] = i;
  for (size_t i = 0; i < k; ++i) {
    const size_t j = i + rng.index(size_t(t_len) - i);
    std::swap(idx[i], idx[j]);
    plan.mask[size_t(idx[i])] = true;
  }
  return plan;
}

/// Rows of seq (T x D) where the plan selects are replaced by the learnable
/// fill vector; other rows pass through unchanged.
template <class S>
Mat<S> apply_mask(const Mat<S>& seq, const MaskPlan& plan, const Vec<S>& fill) {
  if (Eigen::Index(plan.mask.size()) != seq.rows())
    throw UsageError("mask length does not match sequence");
  if (fill.size() != seq.cols()) throw UsageError("fill dimension mismatch");
  Mat<S> out = seq;
  for (Eigen::Index t = 0; t < seq.rows(); ++t)
    if (plan.mask[size_t(t)]) out.row(t) = fill.transpose();
  return out;
}

/// Per-time-step affine map used to reconstruct masked sequences.
template <class S>
struct AffineHead {
  Mat<S> w;  // D x D
  Mat<S> b;  // D x 1

  void init(int dim, Rng& rng) {
    const double k = 1.0 / std::sqrt(double(dim));
    w.resize(dim, dim);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = S(rng.uniform(-k, k));
    b = Mat<S>::Zero(dim, 1);
  }
};

template <class S>
Mat<S> reconstruct(const Mat<S>& masked, const AffineHead<S>& head) {
  Mat<S> out = masked * head.w.transpose();
  out.rowwise() += head.b.col(0).transpose();
  return out;
}

/// Squared-error reconstruction objective over both modalities, normalized by
/// the total element count so the weight stays comparable across sequence
/// lengths.
template <class S>
S reconstruction_loss(const Mat<S>& v_rec, const Mat<S>& v_orig,
                      const Mat<S>& a_rec, const Mat<S>& a_orig) {
  if (v_rec.rows() != v_orig.rows() || v_rec.cols() != v_orig.cols() ||
      a_rec.rows() != a_orig.rows() || a_rec.cols() != a_orig.cols())
    throw UsageError("reconstruction shape mismatch");
  const S n = S(v_rec.size() + a_rec.size());
  return ((v_rec - v_orig).squaredNorm() + (a_rec - a_orig).squaredNorm()) / n;
}

/// d loss / d rec for one modality: 2 (rec - orig) / n_total.
template <class S>
Mat<S> reconstruction_loss_grad(const Mat<S>& rec, const Mat<S>& orig,
                                Eigen::Index n_total) {
  return S(2) * (rec - orig) / S(n_total);
}

}  // namespace pase
