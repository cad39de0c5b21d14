#include "pase/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace pase {

namespace {

void put_u16(std::string& s, uint16_t v) {
  s.push_back(char(v & 0xff));
  s.push_back(char((v >> 8) & 0xff));
}

void put_u32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(char((v >> (8 * i)) & 0xff));
}

constexpr uint16_t kFeatureVersion = 1;

}  // namespace

void export_features(const FeatureTrack& track, const std::string& path) {
  std::string out;
  out += "PASE";
  put_u16(out, kFeatureVersion);
  put_u16(out, uint16_t(track.dim));
  put_u16(out, uint16_t(track.fps));
  put_u32(out, uint32_t(track.frames.rows()));
  // row-major payload
  for (Eigen::Index r = 0; r < track.frames.rows(); ++r)
    for (Eigen::Index c = 0; c < track.frames.cols(); ++c) {
      const float v = track.frames(r, c);
      char buf[4];
      std::memcpy(buf, &v, 4);
      out.append(buf, 4);
    }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write feature file: " + path);
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) throw DataError("short write: " + path);
}

FeatureTrack import_features(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open feature file: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  if (bytes.size() < 4 || bytes.compare(0, 4, "PASE") != 0)
    throw DataError("bad magic");
  if (bytes.size() < 14) throw DataError("truncated payload");
  auto u16 = [&](size_t at) {
    return uint16_t(uint8_t(bytes[at])) | uint16_t(uint8_t(bytes[at + 1])) << 8;
  };
  auto u32 = [&](size_t at) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(bytes[at + i])) << (8 * i);
    return v;
  };
  if (u16(4) != kFeatureVersion) throw DataError("unsupported version");
  FeatureTrack track;
  track.dim = u16(6);
  track.fps = u16(8);
  const uint32_t count = u32(10);
  const size_t expected = size_t(track.dim) * count * 4;
  const size_t have = bytes.size() - 14;
  if (have < expected) throw DataError("truncated payload");
  if (have > expected) throw DataError("inconsistent header");
  track.frames.resize(count, track.dim);
  size_t at = 14;
  for (Eigen::Index r = 0; r < track.frames.rows(); ++r)
    for (Eigen::Index c = 0; c < track.frames.cols(); ++c) {
      float v;
      std::memcpy(&v, bytes.data() + at, 4);
      at += 4;
      track.frames(r, c) = v;
    }
  return track;
}

FeatureTrack extract_features(const std::vector<double>& audio,
                              Model<float>& model,
                              const FrontendConfig& frontend, int fps) {
  const long frame_period =
      std::lround(double(frontend.sample_rate_hz) / double(fps));
  if (long(audio.size()) < frame_period)
    throw DataError("audio shorter than one frame period");
  const long context = frame_period * model.cfg.window;
  const long n_frames =
      (long(audio.size()) * fps + frontend.sample_rate_hz - 1) /
      frontend.sample_rate_hz;  // ceil(duration * fps)

  FeatureTrack track;
  track.fps = fps;
  track.dim = model.cfg.embed_dim;
  track.frames.resize(n_frames, track.dim);
  std::vector<double> window(static_cast<size_t>(context));
  for (long n = 0; n < n_frames; ++n) {
    const long center = n * frame_period;
    const long start = center - context / 2;
    for (long i = 0; i < context; ++i) {
      const long at = start + i;
      window[size_t(i)] =
          (at >= 0 && at < long(audio.size())) ? audio[size_t(at)] : 0.0;
    }
    const MatF spec = make_spectrogram(window, frontend).values.cast<float>();
    VecF pooled;
    if (model.cfg.encoder == EncoderVariant::gru) {
      pooled = gru_forward(model.gru, MatF(spec.transpose()), model.cfg.pooling)
                   .pooled;
    } else {
      AudioCnnTrace<float> trace;
      MatF scratch;
      audio_cnn_forward(model.cnn, MatF(spec.transpose()), trace, pooled, scratch);
    }
    track.frames.row(n) = pooled.transpose();
  }
  return track;
}

SegmentScorer model_scorer(Model<float>& model) {
  SegmentScorer scorer;
  scorer.anchor = [&model](const PreparedSegment& seg) {
    const MatF input = seg.spec.transpose();
    if (model.cfg.encoder == EncoderVariant::gru)
      return VecF(gru_forward(model.gru, input, model.cfg.pooling).pooled);
    AudioCnnTrace<float> trace;
    MatF scratch;
    VecF pooled;
    audio_cnn_forward(model.cnn, input, trace, pooled, scratch);
    return pooled;
  };
  scorer.fuse = [&model](const VecF& anchor, int phoneme_id,
                         const PreparedSegment& source) {
    MatF scratch;
    MatF seq(Eigen::Index(source.windows.size()), model.cfg.embed_dim);
    for (size_t i = 0; i < source.windows.size(); ++i) {
      FeatureMap<float> fm(int(source.windows[i].pixels.rows()),
                           source.windows[i].size, source.windows[i].size);
      fm.data = source.windows[i].pixels;
      VisualTrace<float> tr;
      seq.row(Eigen::Index(i)) =
          visual_forward(model.visual, fm, tr, scratch).transpose();
    }
    return fuse_pair(anchor, phoneme_id, model.table, seq, model.attn);
  };
  return scorer;
}

double retrieval_accuracy(const SegmentScorer& scorer,
                          const PreparedCorpus& corpus, int k_negatives,
                          uint64_t seed) {
  if (corpus.segments.empty()) throw DataError("empty corpus");
  if (k_negatives == 0) return 1.0;

  const Rng root(seed);
  size_t hits = 0;
  for (size_t s = 0; s < corpus.segments.size(); ++s) {
    const PreparedSegment& seg = corpus.segments[s];
    std::vector<size_t> candidates;
    for (size_t o = 0; o < corpus.segments.size(); ++o)
      if (corpus.segments[o].viseme_class != seg.viseme_class)
        candidates.push_back(o);
    if (int(candidates.size()) < k_negatives)
      throw DataError("insufficient distractors");

    Rng rng = root.fork(0x7E7, uint64_t(s));
    const VecF anchor = scorer.anchor(seg);
    const VecF own = scorer.fuse(anchor, seg.phoneme_id, seg);
    const float s_true = cosine_similarity(anchor, own);
    bool first = true;
    for (int k = 0; k < k_negatives; ++k) {
      const size_t pick = candidates[rng.index(candidates.size())];
      const VecF fused =
          scorer.fuse(anchor, seg.phoneme_id, corpus.segments[pick]);
      if (cosine_similarity(anchor, fused) >= s_true) {
        first = false;
        break;
      }
    }
    if (first) ++hits;
  }
  return double(hits) / double(corpus.segments.size());
}

double retrieval_accuracy(Model<float>& model, const PreparedCorpus& corpus,
                          int k_negatives, uint64_t seed) {
  return retrieval_accuracy(model_scorer(model), corpus, k_negatives, seed);
}

AmbiguityReport ambiguity_report(
    Model<float>& model, const PreparedCorpus& corpus,
    const std::vector<std::pair<std::string, std::string>>& pairs) {
  const SegmentScorer scorer = model_scorer(model);

  // pooled audio embeddings per phoneme
  std::map<int, std::vector<VecF>> by_phoneme;
  for (const auto& seg : corpus.segments)
    by_phoneme[seg.phoneme_id].push_back(scorer.anchor(seg));

  AmbiguityReport report;
  double sum_same = 0, sum_cross = 0;
  int n_same = 0, n_cross = 0;
  for (const auto& [a, b] : pairs) {
    const int ia = corpus.inventory.index_of(a);
    const int ib = corpus.inventory.index_of(b);
    if (ia < 0 || !by_phoneme.count(ia))
      throw DataError("phoneme absent from corpus: " + a);
    if (ib < 0 || !by_phoneme.count(ib))
      throw DataError("phoneme absent from corpus: " + b);

    const auto& ea = by_phoneme[ia];
    const auto& eb = by_phoneme[ib];
    double sum = 0;
    int n = 0;
    if (ia == ib) {
      for (size_t i = 0; i < ea.size(); ++i)
        for (size_t j = i + 1; j < ea.size(); ++j) {
          sum += cosine_similarity(ea[i], ea[j]);
          ++n;
        }
    } else {
      for (const auto& va : ea)
        for (const auto& vb : eb) {
          sum += cosine_similarity(va, vb);
          ++n;
        }
    }
    if (n == 0) throw DataError("phoneme absent from corpus: " + a);

    AmbiguityReport::Pair rec;
    rec.a = a;
    rec.b = b;
    rec.same_viseme = corpus.inventory.viseme_class[size_t(ia)] ==
                      corpus.inventory.viseme_class[size_t(ib)];
    rec.similarity = sum / n;
    report.pairs.push_back(rec);
    if (ia != ib) {
      if (rec.same_viseme) {
        sum_same += rec.similarity;
        ++n_same;
      } else {
        sum_cross += rec.similarity;
        ++n_cross;
      }
    }
  }
  report.mean_same_viseme = n_same ? sum_same / n_same : 0;
  report.mean_cross_viseme = n_cross ? sum_cross / n_cross : 0;
  return report;
}

std::string AmbiguityReport::to_text() const {
  std::ostringstream out;
  for (const auto& p : pairs) {
    out << "pair=" << p.a << "," << p.b
        << " group=" << (p.same_viseme ? "same_viseme" : "cross_viseme")
        << " similarity=" << p.similarity << "\n";
  }
  out << "mean_same_viseme=" << mean_same_viseme << "\n";
  out << "mean_cross_viseme=" << mean_cross_viseme << "\n";
  out << "gap=" << mean_same_viseme - mean_cross_viseme << "\n";
  return out.str();
}

Projection project_embeddings(const MatD& embeddings) {
  if (embeddings.rows() < 3)
    throw UsageError("need at least 3 embeddings for projection");
  const Eigen::Index n = embeddings.rows();
  const Eigen::Index d = embeddings.cols();
  const MatD centered = embeddings.rowwise() - embeddings.colwise().mean();
  const MatD cov = centered.transpose() * centered / double(n - 1);

  Eigen::SelfAdjointEigenSolver<MatD> solver(cov);
  if (solver.info() != Eigen::Success)
    throw NumericError("eigendecomposition failed");

  Projection proj;
  proj.eigenvalues = solver.eigenvalues().reverse();
  proj.components.resize(d, 2);
  for (int c = 0; c < 2; ++c) {
    VecD v = solver.eigenvectors().col(d - 1 - c);
    // deterministic sign: largest-magnitude loading positive
    Eigen::Index at = 0;
    v.cwiseAbs().maxCoeff(&at);
    if (v(at) < 0) v = -v;
    proj.components.col(c) = v;
  }
  proj.points = centered * proj.components;
  return proj;
}

void write_scatter_svg(const std::string& path, const MatD& points,
                       const std::vector<std::string>& labels) {
  if (size_t(points.rows()) != labels.size())
    throw UsageError("label count does not match points");
  static const char* kPalette[] = {"#d62728", "#1f77b4", "#2ca02c", "#ff7f0e",
                                   "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                   "#bcbd22", "#17becf"};
  std::vector<std::string> order;
  for (const auto& l : labels)
    if (std::find(order.begin(), order.end(), l) == order.end())
      order.push_back(l);

  const double w = 640, h = 480, margin = 48;
  double x0 = points.col(0).minCoeff(), x1 = points.col(0).maxCoeff();
  double y0 = points.col(1).minCoeff(), y1 = points.col(1).maxCoeff();
  if (x1 - x0 < 1e-12) x1 = x0 + 1;
  if (y1 - y0 < 1e-12) y1 = y0 + 1;
  auto sx = [&](double x) { return margin + (x - x0) / (x1 - x0) * (w - 2 * margin); };
  auto sy = [&](double y) { return h - margin - (y - y0) / (y1 - y0) * (h - 2 * margin); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << h << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    size_t color = 0;
    for (size_t c = 0; c < order.size(); ++c)
      if (order[c] == labels[size_t(i)]) color = c;
    svg << "<circle cx=\"" << sx(points(i, 0)) << "\" cy=\"" << sy(points(i, 1))
        << "\" r=\"4\" fill=\"" << kPalette[color % 10] << "\" fill-opacity=\"0.8\"/>\n";
  }
  for (size_t c = 0; c < order.size(); ++c) {
    svg << "<circle cx=\"" << (w - margin - 90) << "\" cy=\"" << (margin + 18 * c)
        << "\" r=\"4\" fill=\"" << kPalette[c % 10] << "\"/>\n";
    svg << "<text x=\"" << (w - margin - 80) << "\" y=\"" << (margin + 18 * c + 4)
        << "\" font-size=\"12\" font-family=\"sans-serif\">" << order[c]
        << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write svg: " + path);
  f << svg.str();
}

}  // namespace pase
