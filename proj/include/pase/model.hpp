#pragma once

#include <string>
#include <vector>

#include "pase/alignment.hpp"
#include "pase/audio_cnn.hpp"
#include "pase/config_file.hpp"
#include "pase/gru.hpp"
#include "pase/robustness.hpp"
#include "pase/visual.hpp"

namespace pase {

enum class EncoderVariant { gru, cnn };

inline EncoderVariant parse_encoder(const std::string& name) {
  if (name == "gru") return EncoderVariant::gru;
  if (name == "cnn") return EncoderVariant::cnn;
  throw UsageError("unknown encoder variant: " + name);
}

inline const char* encoder_name(EncoderVariant v) {
  return v == EncoderVariant::gru ? "gru" : "cnn";
}

struct ModelConfig {
  int embed_dim = 512;
  int gru_layers = 8;
  int input_bins = 257;  // frontend-dependent
  EncoderVariant encoder = EncoderVariant::gru;
  Pooling pooling = Pooling::final_step;
  int heads = 1;
  int window = 5;
  int visual_input_size = 96;
  int visual_width_divisor = 1;
  int inventory_size = 0;
  double tau = 0.07;
  double alpha = 1.0;
  double mask_ratio = 0.15;

  int in_channels() const { return 3 * window; }

  void validate() const {
    if (embed_dim < 1 || gru_layers < 1 || input_bins < 1 || inventory_size < 1)
      throw UsageError("model dimensions must be positive");
    if (heads < 1 || embed_dim % heads != 0)
      throw UsageError("embedding dim must be divisible by heads");
    if (window < 1 || window % 2 == 0)
      throw UsageError("window must be odd and positive");
    if (tau <= 0) throw UsageError("temperature must be positive");
    if (alpha < 0) throw UsageError("alpha must be non-negative");
    if (mask_ratio < 0 || mask_ratio >= 1)
      throw UsageError("mask ratio must be in [0, 1)");
  }

  void to_config(ConfigFile& cfg) const {
    cfg.set_long("model", "embed_dim", embed_dim);
    cfg.set_long("model", "gru_layers", gru_layers);
    cfg.set_long("model", "input_bins", input_bins);
    cfg.set("model", "encoder", encoder_name(encoder));
    cfg.set("model", "pooling", pooling_name(pooling));
    cfg.set_long("model", "heads", heads);
    cfg.set_long("model", "window", window);
    cfg.set_long("model", "visual_input_size", visual_input_size);
    cfg.set_long("model", "visual_width_divisor", visual_width_divisor);
    cfg.set_long("model", "inventory_size", inventory_size);
    cfg.set_double("model", "tau", tau);
    cfg.set_double("model", "alpha", alpha);
    cfg.set_double("model", "mask_ratio", mask_ratio);
  }

  static ModelConfig from_config(const ConfigFile& cfg) {
    ModelConfig m;
    m.embed_dim = int(cfg.get_long("model", "embed_dim"));
    m.gru_layers = int(cfg.get_long("model", "gru_layers"));
    m.input_bins = int(cfg.get_long("model", "input_bins"));
    m.encoder = parse_encoder(cfg.get("model", "encoder"));
    m.pooling = parse_pooling(cfg.get("model", "pooling"));
    m.heads = int(cfg.get_long("model", "heads"));
    m.window = int(cfg.get_long("model", "window"));
    m.visual_input_size = int(cfg.get_long("model", "visual_input_size"));
    m.visual_width_divisor = int(cfg.get_long("model", "visual_width_divisor"));
    m.inventory_size = int(cfg.get_long("model", "inventory_size"));
    m.tau = cfg.get_double("model", "tau");
    m.alpha = cfg.get_double("model", "alpha");
    m.mask_ratio = cfg.get_double("model", "mask_ratio");
    m.validate();
    return m;
  }
};

/// All trainable state of PASE: the audio encoder (GRU stack or the CNN
/// ablation variant), the visual stack, the phoneme embedding table, the
/// cross-attention projections, the reconstruction heads and the two
/// learnable mask-fill vectors.
template <class S>
struct Model {
  ModelConfig cfg;
  std::vector<GruLayer<S>> gru;
  AudioCnn<S> cnn;
  VisualStack<S> visual;
  PhonemeEmbeddingTable<S> table;
  CrossAttentionParams<S> attn;
  AffineHead<S> recon_audio, recon_visual;
  Mat<S> fill_audio, fill_visual;  // D x 1

  static Model init(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    Rng rng = Rng(seed).fork(0x1417);
    if (cfg.encoder == EncoderVariant::gru) {
      m.gru.resize(size_t(cfg.gru_layers));
      for (int l = 0; l < cfg.gru_layers; ++l)
        m.gru[size_t(l)].init(l == 0 ? cfg.input_bins : cfg.embed_dim,
                              cfg.embed_dim, rng);
    } else {
      m.cnn.init(cfg.input_bins, cfg.embed_dim, rng);
    }
    auto specs = VisualStack<S>::reduced_specs(cfg.visual_width_divisor,
                                               cfg.visual_input_size);
    specs.front().in_ch = cfg.in_channels();
    if (std::max(1, 512 / cfg.visual_width_divisor) != cfg.embed_dim)
      throw UsageError("visual width divisor does not match embed dim");
    m.visual = VisualStack<S>::make(specs, cfg.visual_input_size, rng);
    m.visual.in_channels = cfg.in_channels();
    m.table.init(cfg.inventory_size, cfg.embed_dim, rng);
    m.attn.init(cfg.embed_dim, cfg.heads, rng);
    m.recon_audio.init(cfg.embed_dim, rng);
    m.recon_visual.init(cfg.embed_dim, rng);
    m.fill_audio = Mat<S>::Zero(cfg.embed_dim, 1);
    m.fill_visual = Mat<S>::Zero(cfg.embed_dim, 1);
    return m;
  }

  /// Visits every parameter tensor in a stable order; f(name, Mat&). The
  /// order is the checkpoint and optimizer-state contract.
  template <class F>
  void visit_params(F&& f) {
    if (cfg.encoder == EncoderVariant::gru) {
      for (size_t l = 0; l < gru.size(); ++l) {
        const std::string p = "gru." + std::to_string(l) + ".";
        f(p + "w_z", gru[l].w_z);
        f(p + "w_r", gru[l].w_r);
        f(p + "w_h", gru[l].w_h);
        f(p + "b_z", gru[l].b_z);
        f(p + "b_r", gru[l].b_r);
        f(p + "b_h", gru[l].b_h);
      }
    } else {
      for (size_t l = 0; l < cnn.convs.size(); ++l) {
        const std::string p = "cnn." + std::to_string(l) + ".";
        f(p + "w", cnn.convs[l].w);
        f(p + "b", cnn.convs[l].b);
      }
    }
    for (size_t l = 0; l < visual.layers.size(); ++l) {
      const std::string p = "visual." + std::to_string(l) + ".";
      f(p + "w1", visual.layers[l].conv1.w);
      f(p + "b1", visual.layers[l].conv1.b);
      if (visual.layers[l].spec.kind == LayerKind::residual_block) {
        f(p + "w2", visual.layers[l].conv2.w);
        f(p + "b2", visual.layers[l].conv2.b);
      }
    }
    f("table", table.table);
    f("attn.w_q", attn.w_q);
    f("attn.w_k", attn.w_k);
    f("attn.w_v", attn.w_v);
    f("attn.b_q", attn.b_q);
    f("attn.b_k", attn.b_k);
    f("attn.b_v", attn.b_v);
    f("recon_audio.w", recon_audio.w);
    f("recon_audio.b", recon_audio.b);
    f("recon_visual.w", recon_visual.w);
    f("recon_visual.b", recon_visual.b);
    f("fill_audio", fill_audio);
    f("fill_visual", fill_visual);
  }

  size_t param_count() {
    size_t n = 0;
    visit_params([&](const std::string&, Mat<S>& m) { n += size_t(m.size()); });
    return n;
  }
};

/// Gradient buffers mirroring Model's parameter tensors, visited in the same
/// order (asserted by tests).
template <class S>
struct ModelGrads {
  std::vector<GruLayerGrad<S>> gru;
  AudioCnnGrad<S> cnn;
  VisualGrad<S> visual;
  Mat<S> table;
  AttentionGrad<S> attn;
  Mat<S> recon_audio_w, recon_audio_b, recon_visual_w, recon_visual_b;
  Mat<S> fill_audio, fill_visual;
  bool use_gru = true;

  void init_zero(Model<S>& m) {
    use_gru = m.cfg.encoder == EncoderVariant::gru;
    if (use_gru) {
      gru.resize(m.gru.size());
      for (size_t l = 0; l < m.gru.size(); ++l) gru[l].init_zero(m.gru[l]);
    } else {
      cnn.init_zero(m.cnn);
    }
    visual.init_zero(m.visual);
    table = Mat<S>::Zero(m.table.table.rows(), m.table.table.cols());
    attn.init_zero(m.attn);
    recon_audio_w = Mat<S>::Zero(m.recon_audio.w.rows(), m.recon_audio.w.cols());
    recon_audio_b = Mat<S>::Zero(m.recon_audio.b.rows(), 1);
    recon_visual_w =
        Mat<S>::Zero(m.recon_visual.w.rows(), m.recon_visual.w.cols());
    recon_visual_b = Mat<S>::Zero(m.recon_visual.b.rows(), 1);
    fill_audio = Mat<S>::Zero(m.fill_audio.rows(), 1);
    fill_visual = Mat<S>::Zero(m.fill_visual.rows(), 1);
  }

  template <class F>
  void visit_params(F&& f) {
    if (use_gru) {
      for (size_t l = 0; l < gru.size(); ++l) {
        const std::string p = "gru." + std::to_string(l) + ".";
        f(p + "w_z", gru[l].w_z);
        f(p + "w_r", gru[l].w_r);
        f(p + "w_h", gru[l].w_h);
        f(p + "b_z", gru[l].b_z);
        f(p + "b_r", gru[l].b_r);
        f(p + "b_h", gru[l].b_h);
      }
    } else {
      for (size_t l = 0; l < cnn.w.size(); ++l) {
        const std::string p = "cnn." + std::to_string(l) + ".";
        f(p + "w", cnn.w[l]);
        f(p + "b", cnn.b[l]);
      }
    }
    for (size_t l = 0; l < visual.layers.size(); ++l) {
      const std::string p = "visual." + std::to_string(l) + ".";
      f(p + "w1", visual.layers[l].w1);
      f(p + "b1", visual.layers[l].b1);
      if (visual.layers[l].w2.size() > 0) {
        f(p + "w2", visual.layers[l].w2);
        f(p + "b2", visual.layers[l].b2);
      }
    }
    f("table", table);
    f("attn.w_q", attn.w_q);
    f("attn.w_k", attn.w_k);
    f("attn.w_v", attn.w_v);
    f("attn.b_q", attn.b_q);
    f("attn.b_k", attn.b_k);
    f("attn.b_v", attn.b_v);
    f("recon_audio.w", recon_audio_w);
    f("recon_audio.b", recon_audio_b);
    f("recon_visual.w", recon_visual_w);
    f("recon_visual.b", recon_visual_b);
    f("fill_audio", fill_audio);
    f("fill_visual", fill_visual);
  }
};

/// Everything one anchor contributes to a step: its spectrogram, its own
/// (positive) window sequence, the negatives' window sequences, and the mask
/// stream for the prediction-and-reconstruction branch.
template <class S>
struct AnchorInput {
  Mat<S> spec;  // T x F
  std::vector<FeatureMap<S>> pos;
  std::vector<std::vector<FeatureMap<S>>> negs;
  int phoneme_id = 0;
  Rng mask_rng{0};
};

template <class S>
struct AnchorLosses {
  S total = 0, con = 0, rec = 0;
};

/// Full per-anchor pipeline: audio encoding, visual encoding of the positive
/// and negative sequences, the masking/reconstruction branch, phoneme-aware
/// query construction, cross-attention fusion, the contrastive term, and the
/// weighted total. When grads is non-null the whole thing is differentiated
/// and parameter gradients (scaled by grad_scale) are accumulated.
template <class S>
AnchorLosses<S> anchor_pipeline(const Model<S>& model, const AnchorInput<S>& in,
                                ModelGrads<S>* grads, S grad_scale = S(1)) {
  const ModelConfig& cfg = model.cfg;
  const int dim = cfg.embed_dim;
  Mat<S> scratch;

  // --- audio encoder
  Mat<S> input = in.spec.transpose();  // F x T
  GruForward<S> gfwd;
  AudioCnnTrace<S> ctrace;
  Vec<S> anchor;
  Mat<S> audio_seq;  // T_a x D, row per time step
  if (cfg.encoder == EncoderVariant::gru) {
    gfwd = gru_forward(model.gru, input, cfg.pooling);
    anchor = gfwd.pooled;
    audio_seq = gfwd.top().transpose();
  } else {
    Vec<S> pooled;
    const Mat<S> seq = audio_cnn_forward(model.cnn, input, ctrace, pooled, scratch);
    anchor = pooled;
    audio_seq = seq.transpose();
  }

  // --- visual encoder on positive and negative window sequences
  const auto encode_seq = [&](const std::vector<FeatureMap<S>>& windows,
                              std::vector<VisualTrace<S>>& traces) {
    if (windows.empty()) throw DataError("empty window sequence");
    traces.resize(windows.size());
    Mat<S> seq(Eigen::Index(windows.size()), dim);
    for (size_t i = 0; i < windows.size(); ++i)
      seq.row(Eigen::Index(i)) =
          visual_forward(model.visual, windows[i], traces[i], scratch).transpose();
    return seq;
  };
  std::vector<VisualTrace<S>> pos_traces;
  Mat<S> pos_seq = encode_seq(in.pos, pos_traces);
  std::vector<std::vector<VisualTrace<S>>> neg_traces(in.negs.size());
  std::vector<Mat<S>> neg_seqs(in.negs.size());
  for (size_t j = 0; j < in.negs.size(); ++j)
    neg_seqs[j] = encode_seq(in.negs[j], neg_traces[j]);

  // --- phoneme-aware fusion
  const Vec<S> query = build_query(anchor, in.phoneme_id, model.table);
  AttentionTrace<S> pos_attn;
  const Vec<S> f_pos = cross_attention(query, pos_seq, model.attn, &pos_attn);
  std::vector<AttentionTrace<S>> neg_attn(in.negs.size());
  std::vector<Vec<S>> f_negs(in.negs.size());
  for (size_t j = 0; j < in.negs.size(); ++j)
    f_negs[j] = cross_attention(query, neg_seqs[j], model.attn, &neg_attn[j]);

  const S s_pos = cosine_similarity(anchor, f_pos);
  std::vector<S> s_negs(in.negs.size());
  for (size_t j = 0; j < in.negs.size(); ++j)
    s_negs[j] = cosine_similarity(anchor, f_negs[j]);
  const S l_con = contrastive_loss_from_sims(s_pos, s_negs, S(cfg.tau));

  // --- prediction and reconstruction branch (independent mask streams)
  Rng rng = in.mask_rng;
  const MaskPlan plan_a =
      make_mask_plan(audio_seq.rows(), cfg.mask_ratio, rng.fork(0xA0D10));
  const MaskPlan plan_v =
      make_mask_plan(pos_seq.rows(), cfg.mask_ratio, rng.fork(0x71DE0));
  const Mat<S> masked_a = apply_mask(audio_seq, plan_a, Vec<S>(model.fill_audio.col(0)));
  const Mat<S> masked_v = apply_mask(pos_seq, plan_v, Vec<S>(model.fill_visual.col(0)));
  const Mat<S> rec_a = reconstruct(masked_a, model.recon_audio);
  const Mat<S> rec_v = reconstruct(masked_v, model.recon_visual);
  const S l_rec = reconstruction_loss(rec_v, pos_seq, rec_a, audio_seq);

  AnchorLosses<S> losses;
  losses.con = l_con;
  losses.rec = l_rec;
  losses.total = l_con + S(cfg.alpha) * l_rec;
  if (!grads) return losses;

  // --- backward
  const S g = grad_scale;
  Vec<S> d_anchor = Vec<S>::Zero(dim);
  Mat<S> d_audio_seq = Mat<S>::Zero(audio_seq.rows(), dim);
  Mat<S> d_pos_seq = Mat<S>::Zero(pos_seq.rows(), dim);

  // contrastive term through the cosine similarities
  S d_spos;
  std::vector<S> d_snegs;
  contrastive_loss_grad_sims(s_pos, s_negs, S(cfg.tau), d_spos, d_snegs);
  d_spos *= g;
  for (auto& v : d_snegs) v *= g;

  Vec<S> d_query = Vec<S>::Zero(dim);
  d_anchor += d_spos * cosine_grad_a(anchor, f_pos);
  Vec<S> d_fpos = d_spos * cosine_grad_a(f_pos, anchor);
  cross_attention_backward(query, pos_seq, model.attn, pos_attn, d_fpos,
                           grads->attn, &d_query, &d_pos_seq);
  for (size_t j = 0; j < in.negs.size(); ++j) {
    d_anchor += d_snegs[j] * cosine_grad_a(anchor, f_negs[j]);
    Vec<S> d_fneg = d_snegs[j] * cosine_grad_a(f_negs[j], anchor);
    Mat<S> d_neg_seq = Mat<S>::Zero(neg_seqs[j].rows(), dim);
    cross_attention_backward(query, neg_seqs[j], model.attn, neg_attn[j], d_fneg,
                             grads->attn, &d_query, &d_neg_seq);
    for (Eigen::Index i = 0; i < d_neg_seq.rows(); ++i)
      visual_backward(model.visual, in.negs[j][size_t(i)], neg_traces[j][size_t(i)],
                      Vec<S>(d_neg_seq.row(i).transpose()), grads->visual, scratch);
  }
  // query = anchor + table row
  d_anchor += d_query;
  grads->table.row(in.phoneme_id) += d_query.transpose();

  // reconstruction branch
  const S ga = g * S(cfg.alpha);
  const Eigen::Index n_total = rec_a.size() + rec_v.size();
  if (ga != S(0)) {
    const Mat<S> g_rec_a = ga * reconstruction_loss_grad(rec_a, audio_seq, n_total);
    const Mat<S> g_rec_v = ga * reconstruction_loss_grad(rec_v, pos_seq, n_total);
    // heads: rec = masked * W^T + b
    grads->recon_audio_w.noalias() += g_rec_a.transpose() * masked_a;
    grads->recon_audio_b.col(0) += g_rec_a.colwise().sum().transpose();
    grads->recon_visual_w.noalias() += g_rec_v.transpose() * masked_v;
    grads->recon_visual_b.col(0) += g_rec_v.colwise().sum().transpose();
    const Mat<S> d_masked_a = g_rec_a * model.recon_audio.w;
    const Mat<S> d_masked_v = g_rec_v * model.recon_visual.w;
    // originals appear with a minus sign in the loss
    d_audio_seq -= g_rec_a;
    d_pos_seq -= g_rec_v;
    for (Eigen::Index t = 0; t < d_masked_a.rows(); ++t) {
      if (plan_a.mask[size_t(t)])
        grads->fill_audio.col(0) += d_masked_a.row(t).transpose();
      else
        d_audio_seq.row(t) += d_masked_a.row(t);
    }
    for (Eigen::Index t = 0; t < d_masked_v.rows(); ++t) {
      if (plan_v.mask[size_t(t)])
        grads->fill_visual.col(0) += d_masked_v.row(t).transpose();
      else
        d_pos_seq.row(t) += d_masked_v.row(t);
    }
  }

  // positive windows
  for (Eigen::Index i = 0; i < d_pos_seq.rows(); ++i)
    visual_backward(model.visual, in.pos[size_t(i)], pos_traces[size_t(i)],
                    Vec<S>(d_pos_seq.row(i).transpose()), grads->visual, scratch);

  // audio encoder
  if (cfg.encoder == EncoderVariant::gru) {
    gru_backward(model.gru, input, gfwd, cfg.pooling,
                 Mat<S>(d_audio_seq.transpose()), d_anchor, grads->gru);
  } else {
    audio_cnn_backward(model.cnn, input, ctrace, Mat<S>(d_audio_seq.transpose()),
                       d_anchor, grads->cnn, scratch);
  }
  return losses;
}

}  // namespace pase
