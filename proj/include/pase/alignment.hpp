#pragma once

#include <vector>

#include "pase/common.hpp"
#include "pase/rng.hpp"

namespace pase {

/// Trainable phoneme label embeddings; row p is the label feature added to
/// the audio anchor when forming the attention query.
template <class S>
struct PhonemeEmbeddingTable {
  Mat<S> table;  // |inventory| x D

  void init(int n_labels, int dim, Rng& rng) {
    const double k = 1.0 / std::sqrt(double(dim));
    table.resize(n_labels, dim);
    for (Eigen::Index j = 0; j < table.cols(); ++j)
      for (Eigen::Index i = 0; i < table.rows(); ++i)
        table(i, j) = S(rng.uniform(-k, k));
  }
};

/// Query vector: anchor plus phoneme label feature, elementwise.
template <class S>
Vec<S> build_query(const Vec<S>& anchor, int phoneme_id,
                   const PhonemeEmbeddingTable<S>& table) {
  if (phoneme_id < 0 || phoneme_id >= table.table.rows())
    throw DataError("unknown phoneme id");
  return anchor + table.table.row(phoneme_id).transpose();
}

template <class S>
struct CrossAttentionParams {
  Mat<S> w_q, w_k, w_v;  // D x D
  Mat<S> b_q, b_k, b_v;  // D x 1
  int heads = 1;

  int dim() const { return int(w_q.rows()); }

  void init(int d, int n_heads, Rng& rng) {
    if (n_heads < 1 || d % n_heads != 0)
      throw UsageError("embedding dim must be divisible by heads");
    heads = n_heads;
    const double k = 1.0 / std::sqrt(double(d));
    auto fill = [&](Mat<S>& m, int r, int c) {
      m.resize(r, c);
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
          m(i, j) = S(rng.uniform(-k, k));
    };
    fill(w_q, d, d);
    fill(w_k, d, d);
    fill(w_v, d, d);
    b_q = Mat<S>::Zero(d, 1);
    b_k = Mat<S>::Zero(d, 1);
    b_v = Mat<S>::Zero(d, 1);
  }
};

template <class S>
struct AttentionTrace {
  Vec<S> qp;       // projected query, D
  Mat<S> keys;     // T_v x D
  Mat<S> values;   // T_v x D
  Mat<S> weights;  // heads x T_v softmax rows
  Vec<S> out;      // fused feature, D
};

/// Scaled dot-product attention with a single query vector against the rows
/// of kv; per-head softmax over the T_v rows.
template <class S>
Vec<S> cross_attention(const Vec<S>& query, const Mat<S>& kv,
                       const CrossAttentionParams<S>& p,
                       AttentionTrace<S>* trace = nullptr) {
  if (kv.rows() < 1) throw DataError("empty key/value sequence");
  if (query.size() != p.dim() || kv.cols() != p.dim())
    throw UsageError("attention dimension mismatch");
  const int d = p.dim();
  const int dh = d / p.heads;
  const S inv_sqrt = S(1) / S(std::sqrt(double(dh)));
  const Eigen::Index t_v = kv.rows();

  Vec<S> qp = p.w_q * query + p.b_q.col(0);
  Mat<S> keys = kv * p.w_k.transpose();
  keys.rowwise() += p.b_k.col(0).transpose();
  Mat<S> values = kv * p.w_v.transpose();
  values.rowwise() += p.b_v.col(0).transpose();

  Mat<S> weights(p.heads, t_v);
  Vec<S> out(d);
  for (int h = 0; h < p.heads; ++h) {
    const Eigen::Index off = Eigen::Index(h) * dh;
    Vec<S> scores = keys.middleCols(off, dh) * qp.segment(off, dh) * inv_sqrt;
    const S mx = scores.maxCoeff();
    Vec<S> ex = (scores.array() - mx).exp();
    Vec<S> w = ex / ex.sum();
    weights.row(h) = w.transpose();
    out.segment(off, dh) = values.middleCols(off, dh).transpose() * w;
  }
  if (trace) {
    trace->qp = std::move(qp);
    trace->keys = std::move(keys);
    trace->values = std::move(values);
    trace->weights = std::move(weights);
    trace->out = out;
  }
  return out;
}

template <class S>
struct AttentionGrad {
  Mat<S> w_q, w_k, w_v, b_q, b_k, b_v;

  void init_zero(const CrossAttentionParams<S>& p) {
    const int d = p.dim();
    w_q = Mat<S>::Zero(d, d);
    w_k = Mat<S>::Zero(d, d);
    w_v = Mat<S>::Zero(d, d);
    b_q = Mat<S>::Zero(d, 1);
    b_k = Mat<S>::Zero(d, 1);
    b_v = Mat<S>::Zero(d, 1);
  }
};

/// Backward through cross_attention. Accumulates parameter gradients and, if
/// requested, the gradients w.r.t. the raw query and the kv rows.
template <class S>
void cross_attention_backward(const Vec<S>& query, const Mat<S>& kv,
                              const CrossAttentionParams<S>& p,
                              const AttentionTrace<S>& tr, const Vec<S>& d_out,
                              AttentionGrad<S>& grad, Vec<S>* d_query,
                              Mat<S>* d_kv) {
  const int d = p.dim();
  const int dh = d / p.heads;
  const S inv_sqrt = S(1) / S(std::sqrt(double(dh)));
  const Eigen::Index t_v = kv.rows();

  Vec<S> d_qp = Vec<S>::Zero(d);
  Mat<S> d_keys = Mat<S>::Zero(t_v, d);
  Mat<S> d_values = Mat<S>::Zero(t_v, d);

  for (int h = 0; h < p.heads; ++h) {
    const Eigen::Index off = Eigen::Index(h) * dh;
    const Vec<S> w = tr.weights.row(h).transpose();
    // out_h = values_h^T w
    d_values.middleCols(off, dh) += w * d_out.segment(off, dh).transpose();
    Vec<S> d_w = tr.values.middleCols(off, dh) * d_out.segment(off, dh);
    // softmax backward
    const S dot = w.dot(d_w);
    Vec<S> d_scores = w.cwiseProduct(d_w - Vec<S>::Constant(t_v, dot));
    d_scores *= inv_sqrt;
    d_keys.middleCols(off, dh) += d_scores * tr.qp.segment(off, dh).transpose();
    d_qp.segment(off, dh) += tr.keys.middleCols(off, dh).transpose() * d_scores;
  }

  grad.w_q.noalias() += d_qp * query.transpose();
  grad.b_q.col(0) += d_qp;
  grad.w_k.noalias() += d_keys.transpose() * kv;
  grad.b_k.col(0) += d_keys.colwise().sum().transpose();
  grad.w_v.noalias() += d_values.transpose() * kv;
  grad.b_v.col(0) += d_values.colwise().sum().transpose();
  if (d_query) *d_query += p.w_q.transpose() * d_qp;
  if (d_kv) {
    d_kv->noalias() += d_keys * p.w_k;
    d_kv->noalias() += d_values * p.w_v;
  }
}

/// Phoneme-aware fusion of a visual sequence: query construction followed by
/// cross-attention. Produces the positive fusion from the anchor's own
/// sequence and, reusing the same query, each negative's fusion.
template <class S>
Vec<S> fuse_pair(const Vec<S>& anchor, int phoneme_id,
                 const PhonemeEmbeddingTable<S>& table, const Mat<S>& visual_seq,
                 const CrossAttentionParams<S>& params) {
  return cross_attention(build_query(anchor, phoneme_id, table), visual_seq,
                         params);
}

struct ContrastiveConfig {
  double tau = 0.07;
  double alpha = 1.0;
};

template <class S>
S cosine_similarity(const Vec<S>& a, const Vec<S>& b) {
  const S na = a.norm();
  const S nb = b.norm();
  if (na == S(0) || nb == S(0)) throw NumericError("zero-norm embedding");
  return a.dot(b) / (na * nb);
}

/// d cos(a, b) / d a; the gradient for b follows by symmetry.
template <class S>
Vec<S> cosine_grad_a(const Vec<S>& a, const Vec<S>& b) {
  const S na = a.norm();
  const S nb = b.norm();
  const S s = a.dot(b) / (na * nb);
  return b / (na * nb) - a * (s / (na * na));
}

/// InfoNCE-style objective over one positive and any number of negatives,
/// with similarities divided by the temperature. With no negatives the ratio
/// is 1 and the loss is exactly 0.
template <class S>
S contrastive_loss_from_sims(S s_pos, const std::vector<S>& s_negs, S tau) {
  if (tau <= S(0)) throw UsageError("temperature must be positive");
  // log(1 + sum exp((s_n - s_p)/tau)), computed stably.
  S m = s_pos / tau;
  for (S s : s_negs) m = std::max(m, s / tau);
  S acc = std::exp(s_pos / tau - m);
  for (S s : s_negs) acc += std::exp(s / tau - m);
  return std::log(acc) + m - s_pos / tau;
}

/// Gradients of the contrastive loss w.r.t. the raw similarities.
template <class S>
void contrastive_loss_grad_sims(S s_pos, const std::vector<S>& s_negs, S tau,
                                S& d_pos, std::vector<S>& d_negs) {
  S m = s_pos / tau;
  for (S s : s_negs) m = std::max(m, s / tau);
  const S e_pos = std::exp(s_pos / tau - m);
  S denom = e_pos;
  std::vector<S> e_negs(s_negs.size());
  for (size_t i = 0; i < s_negs.size(); ++i) {
    e_negs[i] = std::exp(s_negs[i] / tau - m);
    denom += e_negs[i];
  }
  d_pos = (e_pos / denom - S(1)) / tau;
  d_negs.resize(s_negs.size());
  for (size_t i = 0; i < s_negs.size(); ++i) d_negs[i] = (e_negs[i] / denom) / tau;
}

template <class S>
S contrastive_loss(const Vec<S>& anchor, const Vec<S>& pos,
                   const std::vector<Vec<S>>& negs,
                   const ContrastiveConfig& cfg) {
  const S s_pos = cosine_similarity(anchor, pos);
  std::vector<S> s_negs;
  s_negs.reserve(negs.size());
  for (const auto& n : negs) s_negs.push_back(cosine_similarity(anchor, n));
  return contrastive_loss_from_sims(s_pos, s_negs, S(cfg.tau));
}

/// Overall objective: contrastive term plus alpha-weighted reconstruction.
template <class S>
S total_loss(S l_con, S l_rec, const ContrastiveConfig& cfg) {
  if (!std::isfinite(double(l_con)) || !std::isfinite(double(l_rec)))
    throw NumericError("non-finite loss term");
  return l_con + S(cfg.alpha) * l_rec;
}

}  // namespace pase
