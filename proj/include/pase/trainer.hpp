#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pase/checkpoint.hpp"
#include "pase/corpus.hpp"
#include "pase/model.hpp"

namespace pase {

struct TrainConfig {
  double learning_rate = 5e-5;
  int batch_size = 16;
  int window = 5;
  long steps = 1000;
  double mask_ratio = 0.15;
  double tau = 0.07;
  double alpha = 1.0;
  uint64_t seed = 1;
  FrontendConfig frontend;
  EncoderVariant encoder = EncoderVariant::gru;
  Pooling pooling = Pooling::final_step;
  int embed_dim = 512;
  int gru_layers = 8;
  int heads = 1;
  int crop_size = 96;
  int negatives_per_anchor = 4;
  long checkpoint_every = 0;  // 0 = final checkpoint only
  std::string checkpoint_path;

  void validate() const {
    if (learning_rate <= 0 || batch_size < 1 || steps < 0)
      throw UsageError("train config fields must be positive");
    if (negatives_per_anchor < 0)
      throw UsageError("negatives_per_anchor must be non-negative");
    frontend.validate();
    model_config(1).validate();
  }

  ModelConfig model_config(int inventory_size) const {
    ModelConfig m;
    m.embed_dim = embed_dim;
    m.gru_layers = gru_layers;
    m.input_bins = frontend.bins();
    m.encoder = encoder;
    m.pooling = pooling;
    m.heads = heads;
    m.window = window;
    m.visual_input_size = crop_size;
    m.visual_width_divisor = std::max(1, 512 / embed_dim);
    m.inventory_size = inventory_size;
    m.tau = tau;
    m.alpha = alpha;
    m.mask_ratio = mask_ratio;
    return m;
  }

  void to_config(ConfigFile& cfg) const;
  static TrainConfig from_config(const ConfigFile& cfg);
};

struct StepMetrics {
  long step = 0;
  double total = 0, con = 0, rec = 0;
};

/// Adam over the model's parameter registry. First/second moments are kept
/// per tensor in registry order; state round-trips through checkpoints.
template <class S>
class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  explicit Adam(Model<S>& model) {
    model.visit_params([&](const std::string&, Mat<S>& p) {
      m_.push_back(Mat<S>::Zero(p.rows(), p.cols()));
      v_.push_back(Mat<S>::Zero(p.rows(), p.cols()));
    });
  }

  long t() const { return t_; }

  void step(Model<S>& model, ModelGrads<S>& grads, double lr) {
    std::vector<Mat<S>*> gs;
    grads.visit_params([&](const std::string&, Mat<S>& g) { gs.push_back(&g); });
    ++t_;
    const S b1 = S(kBeta1), b2 = S(kBeta2);
    const S c1 = S(1) / S(1 - std::pow(kBeta1, double(t_)));
    const S c2 = S(1) / S(1 - std::pow(kBeta2, double(t_)));
    size_t i = 0;
    model.visit_params([&](const std::string&, Mat<S>& p) {
      const Mat<S>& g = *gs[i];
      m_[i] = b1 * m_[i] + (S(1) - b1) * g;
      v_[i] = b2 * v_[i] + (S(1) - b2) * g.cwiseProduct(g);
      p.array() -= S(lr) * (m_[i].array() * c1) /
                   ((v_[i].array() * c2).sqrt() + S(kEps));
      ++i;
    });
  }

  std::vector<Mat<S>>& first_moments() { return m_; }
  std::vector<Mat<S>>& second_moments() { return v_; }
  void set_t(long t) { t_ = t; }

 private:
  std::vector<Mat<S>> m_, v_;
  long t_ = 0;
};

/// Resolves one anchor's batch entry into pipeline tensors.
template <class S>
AnchorInput<S> make_anchor_input(const PreparedCorpus& corpus, int anchor,
                                 const std::vector<int>& negatives,
                                 Rng mask_rng) {
  const PreparedSegment& seg = corpus.segments[size_t(anchor)];
  AnchorInput<S> in;
  in.spec = seg.spec.cast<S>();
  in.phoneme_id = seg.phoneme_id;
  in.mask_rng = mask_rng;
  auto windows_of = [](const PreparedSegment& s) {
    std::vector<FeatureMap<S>> out;
    out.reserve(s.windows.size());
    for (const auto& w : s.windows) {
      FeatureMap<S> fm(int(w.pixels.rows()), w.size, w.size);
      fm.data = w.pixels.template cast<S>();
      out.push_back(std::move(fm));
    }
    return out;
  };
  in.pos = windows_of(seg);
  for (int n : negatives)
    in.negs.push_back(windows_of(corpus.segments[size_t(n)]));
  return in;
}

/// One optimization step over a sampled batch. Throws
/// NumericError("divergence") without touching the model or optimizer when
/// the loss or any gradient is non-finite.
template <class S>
StepMetrics train_step(Model<S>& model, Adam<S>& adam,
                       const PreparedCorpus& corpus, const AlignmentBatch& batch,
                       double learning_rate, long step_index, const Rng& root) {
  const int b = int(batch.anchors.size());
  ModelGrads<S> grads;
  grads.init_zero(model);
  AnchorLosses<S> sum;
  for (int i = 0; i < b; ++i) {
    const AnchorInput<S> in = make_anchor_input<S>(
        corpus, batch.anchors[size_t(i)], batch.negatives[size_t(i)],
        root.fork(0x3A5C, uint64_t(step_index), uint64_t(i)));
    const auto l = anchor_pipeline(model, in, &grads, S(1) / S(b));
    sum.total += l.total;
    sum.con += l.con;
    sum.rec += l.rec;
  }
  StepMetrics metrics;
  metrics.step = step_index;
  metrics.total = double(sum.total) / b;
  metrics.con = double(sum.con) / b;
  metrics.rec = double(sum.rec) / b;

  bool finite = std::isfinite(metrics.total);
  grads.visit_params([&](const std::string&, Mat<S>& g) {
    finite = finite && g.allFinite();
  });
  if (!finite) throw NumericError("divergence");
  adam.step(model, grads, learning_rate);
  return metrics;
}

struct TrainResult {
  Model<float> model;
  std::vector<StepMetrics> metrics;
  std::string checkpoint_path;  // final checkpoint, when one was written
};

/// Optional per-step observer; return false to stop early.
using StepCallback = std::function<bool(const StepMetrics&, Model<float>&)>;

TrainResult train(const TrainConfig& cfg, const PreparedCorpus& corpus,
                  const StepCallback& callback = nullptr);

/// Resumes from a checkpoint: continues at checkpoint step + 1 with restored
/// optimizer state; the metric stream matches an uninterrupted run.
TrainResult resume_train(const TrainConfig& cfg, const PreparedCorpus& corpus,
                         const std::string& checkpoint_path,
                         const StepCallback& callback = nullptr);

/// Central-difference verification of the analytic gradients of the full
/// pipeline objective. Returns the worst relative error over every parameter
/// group; empty parameter tensors are excluded. max_coords_per_tensor caps
/// the number of coordinates sampled per tensor (0 = exhaustive).
double finite_difference_check(Model<double>& model,
                               const std::vector<AnchorInput<double>>& batch,
                               double epsilon, int max_coords_per_tensor = 0);

/// Registry-level worker behind finite_difference_check: worst relative error
/// between central differences of `loss` and the analytic gradients, walking
/// the given tensors in lockstep. Empty tensors are skipped.
double fd_worst_over_tensors(const std::vector<MatD*>& params,
                             const std::vector<const MatD*>& analytic,
                             double epsilon, int max_coords_per_tensor,
                             const std::function<double()>& loss);

}  // namespace pase
