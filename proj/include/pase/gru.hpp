#pragma once

#include <vector>

#include "pase/common.hpp"
#include "pase/rng.hpp"

namespace pase {

enum class Pooling { final_step, mean };

/// One stacked GRU layer. Gate weights act on the concatenated vector
/// [h_{t-1}, x_t]:
///   z_t = sigmoid(W_z [h_{t-1}, x_t] + b_z)
///   r_t = sigmoid(W_r [h_{t-1}, x_t] + b_r)
///   hc_t = tanh(W_h [r_t .* h_{t-1}, x_t] + b_h)
///   h_t = (1 - z_t) .* h_{t-1} + z_t .* hc_t
template <class S>
struct GruLayer {
  Mat<S> w_z, w_r, w_h;  // hidden x (hidden + input)
  Mat<S> b_z, b_r, b_h;  // hidden x 1

  int hidden() const { return int(w_z.rows()); }
  int input() const { return int(w_z.cols()) - hidden(); }

  void init(int input_dim, int hidden_dim, Rng& rng) {
    const double k = 1.0 / std::sqrt(double(hidden_dim));
    auto fill = [&](Mat<S>& m, int r, int c) {
      m.resize(r, c);
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
          m(i, j) = S(rng.uniform(-k, k));
    };
    fill(w_z, hidden_dim, hidden_dim + input_dim);
    fill(w_r, hidden_dim, hidden_dim + input_dim);
    fill(w_h, hidden_dim, hidden_dim + input_dim);
    fill(b_z, hidden_dim, 1);
    fill(b_r, hidden_dim, 1);
    fill(b_h, hidden_dim, 1);
  }
};

template <class S>
Vec<S> sigmoid(const Vec<S>& x) {
  return x.unaryExpr([](S v) { return S(1) / (S(1) + std::exp(-v)); });
}

/// Single cell update; also the unit under the scalar-oracle test.
template <class S>
Vec<S> gru_cell_step(const GruLayer<S>& p, const Vec<S>& x,
                     const Vec<S>& h_prev) {
  const int dh = p.hidden();
  const int dx = p.input();
  if (x.size() != dx || h_prev.size() != dh)
    throw UsageError("gru dimension mismatch");
  Vec<S> u(dh + dx);
  u << h_prev, x;
  const Vec<S> z = sigmoid<S>(p.w_z * u + p.b_z.col(0));
  const Vec<S> r = sigmoid<S>(p.w_r * u + p.b_r.col(0));
  Vec<S> v(dh + dx);
  v << r.cwiseProduct(h_prev), x;
  const Vec<S> hc = (p.w_h * v + p.b_h.col(0)).array().tanh();
  return (Vec<S>::Ones(dh) - z).cwiseProduct(h_prev) + z.cwiseProduct(hc);
}

/// Cached activations of one layer over a sequence; columns index time.
template <class S>
struct GruTrace {
  Mat<S> z, r, hc, h;  // each hidden x T
};

template <class S>
struct GruForward {
  std::vector<GruTrace<S>> traces;  // one per layer
  Vec<S> pooled;                    // anchor embedding A_p

  const Mat<S>& top() const { return traces.back().h; }
};

/// Runs the stacked GRU left to right with zero initial states. input is
/// F x T (spectrogram rows transposed onto columns). Returns the top layer
/// sequence plus the pooled anchor.
template <class S>
GruForward<S> gru_forward(const std::vector<GruLayer<S>>& layers,
                          const Mat<S>& input, Pooling pooling) {
  const Eigen::Index t_len = input.cols();
  if (t_len < 1) throw DataError("empty sequence");
  GruForward<S> fwd;
  fwd.traces.resize(layers.size());
  const Mat<S>* x_seq = &input;
  for (size_t l = 0; l < layers.size(); ++l) {
    const GruLayer<S>& p = layers[l];
    const int dh = p.hidden();
    if (x_seq->rows() != p.input())
      throw UsageError("gru dimension mismatch");
    GruTrace<S>& tr = fwd.traces[l];
    tr.z.resize(dh, t_len);
    tr.r.resize(dh, t_len);
    tr.hc.resize(dh, t_len);
    tr.h.resize(dh, t_len);
    Vec<S> h_prev = Vec<S>::Zero(dh);
    for (Eigen::Index t = 0; t < t_len; ++t) {
      Vec<S> u(dh + x_seq->rows());
      u << h_prev, x_seq->col(t);
      tr.z.col(t) = sigmoid<S>(p.w_z * u + p.b_z.col(0));
      tr.r.col(t) = sigmoid<S>(p.w_r * u + p.b_r.col(0));
      Vec<S> v(dh + x_seq->rows());
      v << tr.r.col(t).cwiseProduct(h_prev), x_seq->col(t);
      tr.hc.col(t) = (p.w_h * v + p.b_h.col(0)).array().tanh();
      tr.h.col(t) = (Vec<S>::Ones(dh) - tr.z.col(t)).cwiseProduct(h_prev) +
                    tr.z.col(t).cwiseProduct(tr.hc.col(t));
      h_prev = tr.h.col(t);
    }
    x_seq = &tr.h;
  }
  if (pooling == Pooling::final_step)
    fwd.pooled = fwd.top().col(t_len - 1);
  else
    fwd.pooled = fwd.top().rowwise().mean();
  return fwd;
}

template <class S>
struct GruLayerGrad {
  Mat<S> w_z, w_r, w_h, b_z, b_r, b_h;

  void init_zero(const GruLayer<S>& p) {
    w_z = Mat<S>::Zero(p.w_z.rows(), p.w_z.cols());
    w_r = Mat<S>::Zero(p.w_r.rows(), p.w_r.cols());
    w_h = Mat<S>::Zero(p.w_h.rows(), p.w_h.cols());
    b_z = Mat<S>::Zero(p.b_z.rows(), 1);
    b_r = Mat<S>::Zero(p.b_r.rows(), 1);
    b_h = Mat<S>::Zero(p.b_h.rows(), 1);
  }
};

/// Backpropagation through time for the whole stack.
///   d_top: gradient w.r.t. the top layer sequence (hidden x T), may be empty.
///   d_pooled: gradient w.r.t. the pooled anchor, may be empty.
/// Parameter gradients are accumulated into grads; d_input (F x T), when
/// non-null, receives the gradient w.r.t. the input spectrogram.
template <class S>
void gru_backward(const std::vector<GruLayer<S>>& layers, const Mat<S>& input,
                  const GruForward<S>& fwd, Pooling pooling, Mat<S> d_top,
                  const Vec<S>& d_pooled, std::vector<GruLayerGrad<S>>& grads,
                  Mat<S>* d_input = nullptr) {
  const Eigen::Index t_len = input.cols();
  const int top_h = layers.back().hidden();
  if (d_top.size() == 0) d_top = Mat<S>::Zero(top_h, t_len);
  if (d_pooled.size() != 0) {
    if (pooling == Pooling::final_step)
      d_top.col(t_len - 1) += d_pooled;
    else
      d_top.colwise() += Vec<S>(d_pooled / S(t_len));
  }

  Mat<S> d_seq = std::move(d_top);  // gradient w.r.t. current layer's h sequence
  for (size_t li = layers.size(); li-- > 0;) {
    const GruLayer<S>& p = layers[li];
    const GruTrace<S>& tr = fwd.traces[li];
    const Mat<S>& x_seq = (li == 0) ? input : fwd.traces[li - 1].h;
    const int dh = p.hidden();
    const int dx = p.input();
    GruLayerGrad<S>& g = grads[li];

    Mat<S> d_below = Mat<S>::Zero(dx, t_len);
    Vec<S> carry = Vec<S>::Zero(dh);  // dL/dh_t flowing from step t+1
    for (Eigen::Index t = t_len - 1; t >= 0; --t) {
      const Vec<S> dh_t = d_seq.col(t) + carry;
      const Vec<S> h_prev =
          (t == 0) ? Vec<S>(Vec<S>::Zero(dh)) : Vec<S>(tr.h.col(t - 1));
      const Vec<S> z = tr.z.col(t);
      const Vec<S> r = tr.r.col(t);
      const Vec<S> hc = tr.hc.col(t);

      Vec<S> u(dh + dx);
      u << h_prev, x_seq.col(t);
      Vec<S> v(dh + dx);
      v << r.cwiseProduct(h_prev), x_seq.col(t);

      // h_t = (1-z) h_prev + z hc
      const Vec<S> d_pre_z = dh_t.cwiseProduct(hc - h_prev)
                                 .cwiseProduct(z)
                                 .cwiseProduct(Vec<S>::Ones(dh) - z);
      const Vec<S> d_hc = dh_t.cwiseProduct(z);
      Vec<S> d_hprev = dh_t.cwiseProduct(Vec<S>::Ones(dh) - z);

      // hc = tanh(W_h v + b_h)
      const Vec<S> d_pre_h =
          d_hc.cwiseProduct(Vec<S>::Ones(dh) - hc.cwiseProduct(hc));
      g.w_h.noalias() += d_pre_h * v.transpose();
      g.b_h.col(0) += d_pre_h;
      const Vec<S> d_v = p.w_h.transpose() * d_pre_h;
      const Vec<S> d_rh = d_v.head(dh);
      d_hprev += d_rh.cwiseProduct(r);
      const Vec<S> d_pre_r = d_rh.cwiseProduct(h_prev)
                                 .cwiseProduct(r)
                                 .cwiseProduct(Vec<S>::Ones(dh) - r);
      g.w_r.noalias() += d_pre_r * u.transpose();
      g.b_r.col(0) += d_pre_r;
      g.w_z.noalias() += d_pre_z * u.transpose();
      g.b_z.col(0) += d_pre_z;

      const Vec<S> d_u = p.w_z.transpose() * d_pre_z + p.w_r.transpose() * d_pre_r;
      d_hprev += d_u.head(dh);
      d_below.col(t) += d_u.tail(dx) + d_v.tail(dx);
      carry = d_hprev;
    }
    if (li == 0) {
      if (d_input) *d_input = std::move(d_below);
    } else {
      d_seq = std::move(d_below);
    }
  }
}

inline Pooling parse_pooling(const std::string& name) {
  if (name == "final_step") return Pooling::final_step;
  if (name == "mean") return Pooling::mean;
  throw UsageError("unknown pooling: " + name);
}

inline const char* pooling_name(Pooling p) {
  return p == Pooling::final_step ? "final_step" : "mean";
}

}  // namespace pase
