#pragma once

#include <utility>
#include <vector>

#include "pase/common.hpp"
#include "pase/rng.hpp"

namespace pase {

enum class LayerKind { conv, residual_block };

struct ConvLayerSpec {
  LayerKind kind = LayerKind::conv;
  int in_ch = 0, out_ch = 0;
  int kh = 0, kw = 0;
  int sh = 1, sw = 1;
  int ph = 0, pw = 0;
};

/// Output spatial extent of one layer. Residual blocks keep the input shape
/// by construction (stride 1, in_ch == out_ch).
inline std::pair<int, int> conv_output_shape(const ConvLayerSpec& spec,
                                             std::pair<int, int> in_shape) {
  if (in_shape.first <= 0 || in_shape.second <= 0)
    throw UsageError("input shape must be positive");
  const int h = conv_extent(in_shape.first, spec.ph, spec.kh, spec.sh);
  const int w = conv_extent(in_shape.second, spec.pw, spec.kw, spec.sw);
  if (h <= 0 || w <= 0) throw DataError("input too small for layer");
  return {h, w};
}

/// Feature map with channels as rows and row-major spatial pixels as columns.
template <class S>
struct FeatureMap {
  Mat<S> data;  // C x (H*W)
  int h = 0, w = 0;

  FeatureMap() = default;
  FeatureMap(int channels, int height, int width)
      : data(Mat<S>::Zero(channels, Eigen::Index(height) * width)),
        h(height),
        w(width) {}
  int channels() const { return int(data.rows()); }
};

/// Patch matrix for conv-as-GEMM: rows index (ci, ky, kx), columns index
/// output pixels in row-major order. Out-of-bounds taps are zero.
template <class S>
void im2col(const FeatureMap<S>& in, const ConvLayerSpec& sp, int oh, int ow,
            Mat<S>& cols) {
  const int c_in = in.channels();
  cols.resize(Eigen::Index(c_in) * sp.kh * sp.kw, Eigen::Index(oh) * ow);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const Eigen::Index col = Eigen::Index(oy) * ow + ox;
      S* dst = cols.data() + col * cols.rows();
      const int iy0 = oy * sp.sh - sp.ph;
      const int ix0 = ox * sp.sw - sp.pw;
      for (int ci = 0; ci < c_in; ++ci) {
        const S* src = in.data.data();  // col-major: entry (ci, p) at p*C + ci
        for (int ky = 0; ky < sp.kh; ++ky) {
          const int iy = iy0 + ky;
          for (int kx = 0; kx < sp.kw; ++kx) {
            const int ix = ix0 + kx;
            S v = S(0);
            if (iy >= 0 && iy < in.h && ix >= 0 && ix < in.w)
              v = src[(Eigen::Index(iy) * in.w + ix) * c_in + ci];
            *dst++ = v;
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatter-adds patch gradients back onto the input map.
template <class S>
void col2im_add(const Mat<S>& cols, const ConvLayerSpec& sp, int oh, int ow,
                FeatureMap<S>& d_in) {
  const int c_in = d_in.channels();
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const Eigen::Index col = Eigen::Index(oy) * ow + ox;
      const S* src = cols.data() + col * cols.rows();
      const int iy0 = oy * sp.sh - sp.ph;
      const int ix0 = ox * sp.sw - sp.pw;
      for (int ci = 0; ci < c_in; ++ci) {
        S* dst = d_in.data.data();
        for (int ky = 0; ky < sp.kh; ++ky) {
          const int iy = iy0 + ky;
          for (int kx = 0; kx < sp.kw; ++kx) {
            const int ix = ix0 + kx;
            const S v = *src++;
            if (iy >= 0 && iy < d_in.h && ix >= 0 && ix < d_in.w)
              dst[(Eigen::Index(iy) * d_in.w + ix) * c_in + ci] += v;
          }
        }
      }
    }
  }
}

/// Weights for one convolution: w is out_ch x (in_ch*kh*kw), row co holds the
/// kernel for output channel co flattened in (ci, ky, kx) order.
template <class S>
struct ConvParams {
  Mat<S> w;
  Mat<S> b;  // out_ch x 1

  void init(const ConvLayerSpec& sp, Rng& rng) {
    const int fan_in = sp.in_ch * sp.kh * sp.kw;
    const double k = 1.0 / std::sqrt(double(fan_in));
    w.resize(sp.out_ch, fan_in);
    b = Mat<S>::Zero(sp.out_ch, 1);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = S(rng.uniform(-k, k));
    for (Eigen::Index i = 0; i < b.rows(); ++i) b(i, 0) = S(rng.uniform(-k, k));
  }
};

template <class S>
FeatureMap<S> conv2d_forward(const FeatureMap<S>& in, const ConvLayerSpec& sp,
                             const ConvParams<S>& p, Mat<S>& scratch) {
  const auto [oh, ow] = conv_output_shape(sp, {in.h, in.w});
  im2col(in, sp, oh, ow, scratch);
  FeatureMap<S> out(sp.out_ch, oh, ow);
  out.data.noalias() = p.w * scratch;
  out.data.colwise() += p.b.col(0);
  return out;
}

/// Backward pass for one convolution. d_out has the output's shape; gradients
/// are accumulated into dw/db; if d_in is non-null the input gradient is
/// accumulated there. The patch matrix is rebuilt from the cached input.
template <class S>
void conv2d_backward(const FeatureMap<S>& in, const ConvLayerSpec& sp,
                     const ConvParams<S>& p, const FeatureMap<S>& d_out,
                     Mat<S>& dw, Mat<S>& db, FeatureMap<S>* d_in,
                     Mat<S>& scratch) {
  im2col(in, sp, d_out.h, d_out.w, scratch);
  dw.noalias() += d_out.data * scratch.transpose();
  db.col(0).noalias() += d_out.data.rowwise().sum();
  if (d_in) {
    Mat<S> d_cols = p.w.transpose() * d_out.data;
    col2im_add(d_cols, sp, d_out.h, d_out.w, *d_in);
  }
}

template <class S>
void relu_inplace(Mat<S>& m) {
  m = m.cwiseMax(S(0));
}

/// Gradient through ReLU given the post-activation values.
template <class S>
void relu_backward_inplace(const Mat<S>& post, Mat<S>& d) {
  d.array() *= (post.array() > S(0)).template cast<S>();
}

}  // namespace pase
