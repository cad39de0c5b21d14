#pragma once

#include <vector>

#include "pase/conv.hpp"

namespace pase {

/// Ablation-variant audio encoder: a fixed strided 1-D convolutional stack
/// over the spectrogram (channels = frequency bins, width = time) with global
/// average pooling to the embedding dimension. Built on the 2-D conv
/// machinery with height 1.
template <class S>
struct AudioCnn {
  std::vector<ConvLayerSpec> specs;
  std::vector<ConvParams<S>> convs;

  int out_dim() const { return specs.empty() ? 0 : specs.back().out_ch; }

  static std::vector<ConvLayerSpec> default_specs(int input_bins, int dim) {
    auto c1d = [](int ic, int oc, int stride) {
      return ConvLayerSpec{LayerKind::conv, ic, oc, 1, 3, 1, stride, 0, 1};
    };
    return {c1d(input_bins, dim, 1), c1d(dim, dim, 2), c1d(dim, dim, 2)};
  }

  /// Time-steps of input shift that move the pre-pooling map by one column.
  int total_stride() const {
    int s = 1;
    for (const auto& sp : specs) s *= sp.sw;
    return s;
  }

  void init(int input_bins, int dim, Rng& rng) {
    specs = default_specs(input_bins, dim);
    convs.resize(specs.size());
    for (size_t i = 0; i < specs.size(); ++i) convs[i].init(specs[i], rng);
  }
};

template <class S>
struct AudioCnnTrace {
  std::vector<FeatureMap<S>> out;  // post-ReLU maps
};

/// Returns the pre-pooling sequence (dim x T') and writes the pooled
/// embedding; input is bins x T.
template <class S>
Mat<S> audio_cnn_forward(const AudioCnn<S>& enc, const Mat<S>& input,
                         AudioCnnTrace<S>& trace, Vec<S>& pooled,
                         Mat<S>& scratch) {
  if (input.cols() < 1) throw DataError("empty sequence");
  if (input.rows() != enc.specs.front().in_ch)
    throw UsageError("audio cnn dimension mismatch");
  FeatureMap<S> x(int(input.rows()), 1, int(input.cols()));
  x.data = input;
  trace.out.resize(enc.specs.size());
  for (size_t i = 0; i < enc.specs.size(); ++i) {
    trace.out[i] = conv2d_forward((i == 0) ? x : trace.out[i - 1], enc.specs[i],
                                  enc.convs[i], scratch);
    relu_inplace(trace.out[i].data);
  }
  pooled = trace.out.back().data.rowwise().mean();
  return trace.out.back().data;
}

template <class S>
struct AudioCnnGrad {
  std::vector<Mat<S>> w, b;

  void init_zero(const AudioCnn<S>& enc) {
    w.resize(enc.convs.size());
    b.resize(enc.convs.size());
    for (size_t i = 0; i < enc.convs.size(); ++i) {
      w[i] = Mat<S>::Zero(enc.convs[i].w.rows(), enc.convs[i].w.cols());
      b[i] = Mat<S>::Zero(enc.convs[i].b.rows(), 1);
    }
  }
};

template <class S>
void audio_cnn_backward(const AudioCnn<S>& enc, const Mat<S>& input,
                        const AudioCnnTrace<S>& trace, Mat<S> d_seq,
                        const Vec<S>& d_pooled, AudioCnnGrad<S>& grad,
                        Mat<S>& scratch) {
  const auto& last = trace.out.back();
  if (d_seq.size() == 0) d_seq = Mat<S>::Zero(last.data.rows(), last.data.cols());
  if (d_pooled.size() != 0)
    d_seq.colwise() += Vec<S>(d_pooled / S(last.data.cols()));

  FeatureMap<S> d_out;
  d_out.data = std::move(d_seq);
  d_out.h = last.h;
  d_out.w = last.w;
  for (size_t i = enc.specs.size(); i-- > 0;) {
    relu_backward_inplace(trace.out[i].data, d_out.data);
    FeatureMap<S> d_in;
    const bool need_dx = i > 0;
    if (need_dx) {
      const auto& below = trace.out[i - 1];
      d_in = FeatureMap<S>(below.channels(), below.h, below.w);
    }
    if (i == 0) {
      FeatureMap<S> x(int(input.rows()), 1, int(input.cols()));
      x.data = input;
      conv2d_backward(x, enc.specs[i], enc.convs[i], d_out, grad.w[i], grad.b[i],
                      static_cast<FeatureMap<S>*>(nullptr), scratch);
    } else {
      conv2d_backward(trace.out[i - 1], enc.specs[i], enc.convs[i], d_out,
                      grad.w[i], grad.b[i], &d_in, scratch);
    }
    if (need_dx) d_out = std::move(d_in);
  }
}

}  // namespace pase
