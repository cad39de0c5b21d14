#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pase/corpus.hpp"
#include "pase/model.hpp"

namespace pase {

/// Frame-rate feature track exported to downstream renderers.
struct FeatureTrack {
  int fps = 25;
  int dim = 512;
  MatF frames;  // N x dim
  std::string source_audio;
};

/// Binary layout: magic "PASE", u16 version, u16 dim, u16 fps, u32 frame
/// count, then row-major little-endian 32-bit floats.
void export_features(const FeatureTrack& track, const std::string& path);
FeatureTrack import_features(const std::string& path);

/// Per-video-frame pooled audio embeddings: for each frame timestamp n/fps
/// the model encodes a centered audio context window (window * frame-period
/// samples, zero-padded at clip edges).
FeatureTrack extract_features(const std::vector<double>& audio,
                              Model<float>& model, const FrontendConfig& frontend,
                              int fps = 25);

/// Scoring hooks for retrieval so tests can swap in oracle encoders: anchor()
/// returns the pooled audio embedding for a segment, fuse() the
/// query-conditioned fusion of a visual window sequence.
struct SegmentScorer {
  std::function<VecF(const PreparedSegment&)> anchor;
  std::function<VecF(const VecF& anchor, int phoneme_id,
                     const PreparedSegment& visual_source)>
      fuse;
};

SegmentScorer model_scorer(Model<float>& model);

/// Fraction of segments whose own visual sequence outranks k distractor
/// sequences drawn from other viseme classes. k = 0 is trivially 1.0.
double retrieval_accuracy(const SegmentScorer& scorer, const PreparedCorpus& corpus,
                          int k_negatives, uint64_t seed);
double retrieval_accuracy(Model<float>& model, const PreparedCorpus& corpus,
                          int k_negatives, uint64_t seed);

struct AmbiguityReport {
  struct Pair {
    std::string a, b;
    bool same_viseme = false;
    double similarity = 0;
  };
  std::vector<Pair> pairs;
  double mean_same_viseme = 0;
  double mean_cross_viseme = 0;

  std::string to_text() const;  // key=value lines, one per record
};

/// Mean pairwise cosine similarity of pooled audio embeddings for each
/// phoneme pair, grouped into same-viseme and cross-viseme means.
AmbiguityReport ambiguity_report(
    Model<float>& model, const PreparedCorpus& corpus,
    const std::vector<std::pair<std::string, std::string>>& pairs);

/// PCA to two components via covariance eigendecomposition; component signs
/// are fixed by making each component's largest-magnitude loading positive.
struct Projection {
  MatD points;  // N x 2
  MatD components;  // D x 2
  VecD eigenvalues;  // all D, descending
};

Projection project_embeddings(const MatD& embeddings);

/// Scatter plot of projected points colored by label.
void write_scatter_svg(const std::string& path, const MatD& points,
                       const std::vector<std::string>& labels);

}  // namespace pase
