#pragma once

#include <string>
#include <vector>

#include "pase/common.hpp"
#include "pase/frontend.hpp"
#include "pase/image.hpp"
#include "pase/rng.hpp"

namespace pase {

struct PhonemeInterval {
  std::string phoneme;
  double start_s = 0;
  double end_s = 0;

  bool operator==(const PhonemeInterval&) const = default;
};

/// Label inventory plus the phoneme -> viseme-group map. Phonemes that share
/// a lip shape (e.g. /t/ and /d/) must map to the same group.
struct PhonemeInventory {
  std::vector<std::string> labels;
  std::vector<int> viseme_class;  // parallel to labels

  static PhonemeInventory from_groups(
      const std::vector<std::vector<std::string>>& groups);

  /// The consonant groups that share lip shapes: plosive pairs /p b/,
  /// /t d/, /k g/; the nasals /m n ng/; fricative pairs /f v/, /s z/,
  /// /th dh/, /sh zh/; and the affricates /ch jh/.
  static PhonemeInventory consonant_groups();

  /// Eight phonemes over four viseme classes ({t d}, {s z}, {m n}, {k g});
  /// the small-corpus default.
  static PhonemeInventory small_consonant_groups();

  int index_of(const std::string& label) const;
  int num_viseme_classes() const;
  size_t size() const { return labels.size(); }

  bool operator==(const PhonemeInventory&) const = default;
};

struct PhonemeSegment {
  int phoneme_id = -1;
  std::vector<double> audio;
  std::vector<int> frame_indices;
  std::string clip_id;
};

/// Five lip crops stacked channel-wise, frame-major (frame0 RGB, frame1 RGB,
/// ...). Values live in [0, 1].
struct LipWindow {
  MatF pixels;  // (3 * window) x (size * size)
  int size = 0;
  int center_frame = 0;
};

struct Clip {
  std::string id;
  std::vector<double> audio;
  std::vector<Image> frames;
  std::vector<Landmarks> landmarks;  // one per frame
  std::vector<PhonemeInterval> intervals;

  bool operator==(const Clip&) const;
};

struct Corpus {
  PhonemeInventory inventory;
  int sample_rate = 16000;
  double fps = 25.0;
  std::vector<Clip> clips;

  bool operator==(const Corpus&) const;
};

/// Parses a forced-alignment file: either the plain TSV
/// (LABEL<TAB>start_s<TAB>end_s, '#' comments) or a TextGrid interval tier.
/// Intervals come back sorted and non-overlapping with silence labels
/// dropped; labels absent from the inventory (when one is given) are dropped
/// as unknown.
std::vector<PhonemeInterval> parse_alignment(
    const std::string& path, const PhonemeInventory* inventory = nullptr);
std::vector<PhonemeInterval> parse_alignment_text(
    const std::string& text, const std::string& origin,
    const PhonemeInventory* inventory = nullptr);

/// Reads per-frame landmark files: 68 lines of "x y" per frame.
std::vector<Landmarks> parse_landmarks(const std::string& path);

/// Slices a clip into per-phoneme segments. frame_indices holds every frame
/// whose timestamp falls inside [start, end); when that set is empty the
/// frame containing the interval midpoint stands in.
std::vector<PhonemeSegment> segment_clip(const std::vector<double>& audio,
                                         int frame_count, double fps,
                                         const std::vector<PhonemeInterval>& intervals,
                                         int sample_rate,
                                         const PhonemeInventory& inventory,
                                         const std::string& clip_id = "");

/// Stacks frames [center-w/2, center+w/2] channel-wise with edge replication
/// at clip boundaries.
LipWindow build_window(const std::vector<Image>& lip_crops, int center,
                       int window = 5);

// ---------------------------------------------------------------------------
// Synthetic corpus

struct SyntheticConfig {
  int frame_width = 128;
  int frame_height = 96;
  double fps = 25.0;
  int sample_rate = 16000;
  int min_dur_ms = 60;
  int max_dur_ms = 140;
  // Viseme-class visual signature: mouth aperture/half-width in pixels.
  double aperture_base = 3.0;
  double aperture_gap = 5.0;
  double halfwidth_base = 30.0;
  double halfwidth_gap = -2.0;
  double jitter_px = 0.6;
  // Per-phoneme audio signature: two sinusoids at exact STFT bin centers.
  double tone_amp = 0.3;
  double noise_amp = 0.02;
  int n_fft = 512;
};

/// Audio signature bins for phoneme i (bin-centered sinusoid frequencies).
std::pair<int, int> synthetic_tone_bins(int phoneme_id);

/// Builds a corpus whose audio identifies the phoneme while the rendered
/// ellipse "lips" identify only the viseme class, reproducing the
/// ambiguity structure (/t/ and /d/ sound different but look alike).
Corpus generate_synthetic_corpus(int n_clips, const PhonemeInventory& inventory,
                                 uint64_t seed,
                                 const SyntheticConfig& cfg = {});

/// Manifest layout: one directory per clip with audio.wav, frame_###.png,
/// alignment.tsv, landmarks.txt; inventory.tsv at the root.
void write_corpus(const Corpus& corpus, const std::string& dir);
Corpus load_corpus(const std::string& dir,
                   const PhonemeInventory* inventory = nullptr);

// ---------------------------------------------------------------------------
// Prepared (training-ready) view

struct PreparedSegment {
  int phoneme_id = -1;
  int viseme_class = -1;
  std::string clip_id;
  MatF spec;                       // T x F
  std::vector<LipWindow> windows;  // one per covered frame
};

struct PreparedCorpus {
  PhonemeInventory inventory;
  std::vector<PreparedSegment> segments;
  int bins = 0;

  int num_viseme_classes() const { return inventory.num_viseme_classes(); }
};

PreparedCorpus prepare_corpus(const Corpus& corpus, const FrontendConfig& frontend,
                              int crop_size = 96, int window = 5);

/// One contrastive step's worth of segment references: positives are each
/// anchor's own windows; negatives index segments from other viseme classes.
struct AlignmentBatch {
  std::vector<int> anchors;
  std::vector<std::vector<int>> negatives;  // per anchor
};

AlignmentBatch sample_batch(const PreparedCorpus& corpus, int batch_size,
                            int negatives_per_anchor, Rng rng);

}  // namespace pase
