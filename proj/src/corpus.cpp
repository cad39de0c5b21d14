#include "pase/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "pase/wav.hpp"

namespace fs = std::filesystem;

namespace pase {

namespace {

constexpr double kPi = 3.14159265358979323846;

const std::set<std::string>& silence_labels() {
  static const std::set<std::string> s = {"",    "sil",     "sp",  "spn", "pau",
                                          "unk", "silence", "<unk>", "<eps>",
                                          "noise"};
  return s;
}

std::string lower(std::string s) {
  for (char& c : s) c = char(std::tolower(uint8_t(c)));
  return s;
}

bool is_silence(const std::string& label) {
  return silence_labels().count(lower(label)) > 0;
}

double quantize_16th(double v) { return std::round(v * 16.0) / 16.0; }

double quantize_i16(double v) {
  long q = std::lround(std::clamp(v, -1.0, 1.0) * 32768.0);
  q = std::clamp(q, -32768L, 32767L);
  return double(q) / 32768.0;
}

void finalize_intervals(std::vector<PhonemeInterval>& out,
                        const PhonemeInventory* inventory) {
  std::stable_sort(out.begin(), out.end(),
                   [](const PhonemeInterval& a, const PhonemeInterval& b) {
                     return a.start_s < b.start_s;
                   });
  for (size_t i = 1; i < out.size(); ++i)
    if (out[i].start_s < out[i - 1].end_s - 1e-9)
      throw DataError("non-monotonic alignment");
  if (inventory) {
    std::erase_if(out, [&](const PhonemeInterval& iv) {
      return inventory->index_of(iv.phoneme) < 0;
    });
  }
}

std::vector<PhonemeInterval> parse_tsv_alignment(const std::string& text,
                                                 const std::string& origin,
                                                 const PhonemeInventory* inventory) {
  std::vector<PhonemeInterval> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::istringstream row(line);
    std::string label, start_str, end_str, extra;
    if (!std::getline(row, label, '\t') || !std::getline(row, start_str, '\t') ||
        !std::getline(row, end_str, '\t'))
      throw DataError(origin + ": malformed line " + std::to_string(lineno) +
                      ": expected LABEL<TAB>start<TAB>end");
    if (std::getline(row, extra, '\t'))
      throw DataError(origin + ": malformed line " + std::to_string(lineno) +
                      ": trailing fields");
    char* end = nullptr;
    const double start_s = std::strtod(start_str.c_str(), &end);
    if (end == start_str.c_str() || *end != '\0')
      throw DataError(origin + ": malformed line " + std::to_string(lineno) +
                      ": bad start time");
    const double end_s = std::strtod(end_str.c_str(), &end);
    if (end == end_str.c_str() || *end != '\0')
      throw DataError(origin + ": malformed line " + std::to_string(lineno) +
                      ": bad end time");
    if (is_silence(label)) continue;
    if (!(start_s >= 0) || !(start_s < end_s))
      throw DataError(origin + ": malformed line " + std::to_string(lineno) +
                      ": interval must satisfy 0 <= start < end");
    out.push_back({label, start_s, end_s});
  }
  finalize_intervals(out, inventory);
  return out;
}

/// Minimal TextGrid interval-tier reader: collects xmin/xmax/text triplets of
/// the first tier's intervals.
std::vector<PhonemeInterval> parse_textgrid_alignment(
    const std::string& text, const std::string& origin,
    const PhonemeInventory* inventory) {
  std::vector<PhonemeInterval> out;
  std::istringstream in(text);
  std::string line;
  int tier_count = 0;
  bool in_intervals = false;
  double xmin = 0, xmax = 0;
  bool have_min = false, have_max = false;
  auto value_after = [](const std::string& s, size_t eq) {
    std::string v = s.substr(eq + 1);
    const size_t a = v.find_first_not_of(" \t\r");
    return a == std::string::npos ? std::string() : v.substr(a);
  };
  while (std::getline(in, line)) {
    const size_t eq = line.find('=');
    if (line.find("name =") != std::string::npos ||
        line.find("name = ") != std::string::npos) {
      ++tier_count;
      if (tier_count > 1) break;  // first tier only
      continue;
    }
    if (line.find("intervals [") != std::string::npos) {
      in_intervals = true;
      have_min = have_max = false;
      continue;
    }
    if (!in_intervals || eq == std::string::npos) continue;
    if (line.find("xmin") != std::string::npos) {
      xmin = std::strtod(value_after(line, eq).c_str(), nullptr);
      have_min = true;
    } else if (line.find("xmax") != std::string::npos) {
      xmax = std::strtod(value_after(line, eq).c_str(), nullptr);
      have_max = true;
    } else if (line.find("text") != std::string::npos) {
      std::string v = value_after(line, eq);
      const size_t q1 = v.find('"');
      const size_t q2 = v.rfind('"');
      std::string label =
          (q1 != std::string::npos && q2 > q1) ? v.substr(q1 + 1, q2 - q1 - 1) : v;
      if (have_min && have_max && !is_silence(label) && xmax > xmin)
        out.push_back({label, xmin, xmax});
      have_min = have_max = false;
    }
  }
  if (out.empty() && tier_count == 0)
    throw DataError(origin + ": no interval tier found");
  finalize_intervals(out, inventory);
  return out;
}

Image render_mouth_frame(const SyntheticConfig& cfg, double aperture,
                         double halfwidth) {
  Image img(cfg.frame_width, cfg.frame_height);
  const double cx = cfg.frame_width / 2.0;
  const double cy = cfg.frame_height * 0.62;
  const double lip_a = halfwidth + 5.0;
  const double lip_b = aperture + 5.0;
  const double mouth_a = std::max(halfwidth * 0.85, 1.0);
  const double mouth_b = std::max(aperture, 0.5);
  auto coverage = [](double e) {
    // soft ellipse edge; e is the normalized quadratic form
    return std::clamp(0.5 + (1.0 - e) * 4.0, 0.0, 1.0);
  };
  const float bg[3] = {0.60f, 0.48f, 0.42f};
  const float lip[3] = {0.72f, 0.32f, 0.33f};
  const float mouth[3] = {0.08f, 0.05f, 0.06f};
  for (int y = 0; y < cfg.frame_height; ++y) {
    for (int x = 0; x < cfg.frame_width; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double e_lip =
          (dx * dx) / (lip_a * lip_a) + (dy * dy) / (lip_b * lip_b);
      const double e_mouth =
          (dx * dx) / (mouth_a * mouth_a) + (dy * dy) / (mouth_b * mouth_b);
      const double a_lip = coverage(e_lip);
      const double a_mouth = coverage(e_mouth);
      float* px = img.at(x, y);
      for (int c = 0; c < 3; ++c) {
        double v = bg[c] * (1 - a_lip) + lip[c] * a_lip;
        v = v * (1 - a_mouth) + mouth[c] * a_mouth;
        px[c] = float(std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0);
      }
    }
  }
  return img;
}

Landmarks make_landmarks(const SyntheticConfig& cfg, double aperture,
                         double halfwidth) {
  Landmarks m{};
  const double w = cfg.frame_width, h = cfg.frame_height;
  const double cx = w / 2.0;
  const double cy_face = h * 0.45;
  // jaw 0..16: lower face arc
  for (int i = 0; i <= 16; ++i) {
    const double t = kPi * double(i) / 16.0;
    m[size_t(i)] = {cx - 0.42 * w * std::cos(t),
                    cy_face + 0.50 * h * std::sin(t)};
  }
  // brows 17..26
  for (int i = 0; i < 5; ++i) {
    m[size_t(17 + i)] = {cx - 0.30 * w + 0.05 * w * i, h * 0.22};
    m[size_t(22 + i)] = {cx + 0.10 * w + 0.05 * w * i, h * 0.22};
  }
  // nose 27..35
  for (int i = 0; i < 4; ++i) m[size_t(27 + i)] = {cx, h * (0.28 + 0.05 * i)};
  for (int i = 0; i < 5; ++i)
    m[size_t(31 + i)] = {cx + 0.03 * w * (i - 2), h * 0.50};
  // eyes 36..47
  for (int i = 0; i < 6; ++i) {
    const double t = 2.0 * kPi * i / 6.0;
    m[size_t(36 + i)] = {cx - 0.20 * w + 0.05 * w * std::cos(t),
                         h * 0.30 + 0.02 * h * std::sin(t)};
    m[size_t(42 + i)] = {cx + 0.20 * w + 0.05 * w * std::cos(t),
                         h * 0.30 + 0.02 * h * std::sin(t)};
  }
  // mouth: outer ring 48..59 on the lip ellipse, inner ring 60..67
  const double cy = h * 0.62;
  const double lip_a = halfwidth + 5.0, lip_b = aperture + 5.0;
  for (int i = 0; i < 12; ++i) {
    const double t = 2.0 * kPi * i / 12.0;
    m[size_t(48 + i)] = {cx + lip_a * std::cos(t), cy + lip_b * std::sin(t)};
  }
  const double in_a = std::max(halfwidth * 0.85, 1.0);
  const double in_b = std::max(aperture, 0.5);
  for (int i = 0; i < 8; ++i) {
    const double t = 2.0 * kPi * i / 8.0;
    m[size_t(60 + i)] = {cx + in_a * std::cos(t), cy + in_b * std::sin(t)};
  }
  for (auto& p : m) {
    p.x = quantize_16th(std::clamp(p.x, 0.0, w - 1));
    p.y = quantize_16th(std::clamp(p.y, 0.0, h - 1));
  }
  return m;
}

}  // namespace

PhonemeInventory PhonemeInventory::from_groups(
    const std::vector<std::vector<std::string>>& groups) {
  PhonemeInventory inv;
  for (size_t g = 0; g < groups.size(); ++g) {
    for (const auto& label : groups[g]) {
      if (inv.index_of(label) >= 0)
        throw UsageError("duplicate phoneme label: " + label);
      inv.labels.push_back(label);
      inv.viseme_class.push_back(int(g));
    }
  }
  return inv;
}

PhonemeInventory PhonemeInventory::consonant_groups() {
  return from_groups({{"P", "B"},
                      {"T", "D"},
                      {"K", "G"},
                      {"M", "N", "NG"},
                      {"F", "V"},
                      {"S", "Z"},
                      {"TH", "DH"},
                      {"SH", "ZH"},
                      {"CH", "JH"}});
}

PhonemeInventory PhonemeInventory::small_consonant_groups() {
  return from_groups({{"T", "D"}, {"S", "Z"}, {"M", "N"}, {"K", "G"}});
}

int PhonemeInventory::index_of(const std::string& label) const {
  for (size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return int(i);
  return -1;
}

int PhonemeInventory::num_viseme_classes() const {
  std::set<int> classes(viseme_class.begin(), viseme_class.end());
  return int(classes.size());
}

std::vector<PhonemeInterval> parse_alignment_text(
    const std::string& text, const std::string& origin,
    const PhonemeInventory* inventory) {
  if (text.find("ooTextFile") != std::string::npos ||
      text.rfind("File type", 0) == 0)
    return parse_textgrid_alignment(text, origin, inventory);
  return parse_tsv_alignment(text, origin, inventory);
}

std::vector<PhonemeInterval> parse_alignment(const std::string& path,
                                             const PhonemeInventory* inventory) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open alignment file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_alignment_text(buf.str(), path, inventory);
}

std::vector<Landmarks> parse_landmarks(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open landmark file: " + path);
  std::vector<Landmarks> frames;
  Landmarks current{};
  int idx = 0;
  double x, y;
  while (in >> x >> y) {
    current[size_t(idx)] = {x, y};
    if (++idx == 68) {
      frames.push_back(current);
      idx = 0;
    }
  }
  if (idx != 0)
    throw DataError(path + ": landmark count not a multiple of 68");
  return frames;
}

std::vector<PhonemeSegment> segment_clip(const std::vector<double>& audio,
                                         int frame_count, double fps,
                                         const std::vector<PhonemeInterval>& intervals,
                                         int sample_rate,
                                         const PhonemeInventory& inventory,
                                         const std::string& clip_id) {
  std::vector<PhonemeSegment> out;
  for (const auto& iv : intervals) {
    const long s0 = std::lround(iv.start_s * sample_rate);
    const long s1 = std::lround(iv.end_s * sample_rate);
    if (s1 > long(audio.size())) throw DataError("interval past audio end");
    PhonemeSegment seg;
    seg.phoneme_id = inventory.index_of(iv.phoneme);
    if (seg.phoneme_id < 0) continue;
    seg.clip_id = clip_id;
    seg.audio.assign(audio.begin() + s0, audio.begin() + s1);
    int f_lo = int(std::ceil(iv.start_s * fps - 1e-9));
    int f_hi = int(std::ceil(iv.end_s * fps - 1e-9)) - 1;
    f_lo = std::max(f_lo, 0);
    f_hi = std::min(f_hi, frame_count - 1);
    if (f_lo > f_hi) {
      const double mid = 0.5 * (iv.start_s + iv.end_s);
      const int f = std::clamp(int(std::floor(mid * fps)), 0, frame_count - 1);
      seg.frame_indices = {f};
    } else {
      for (int f = f_lo; f <= f_hi; ++f) seg.frame_indices.push_back(f);
    }
    out.push_back(std::move(seg));
  }
  return out;
}

LipWindow build_window(const std::vector<Image>& lip_crops, int center,
                       int window) {
  if (lip_crops.empty()) throw DataError("empty clip");
  if (window < 1 || window % 2 == 0)
    throw UsageError("window must be odd and positive");
  if (center < 0 || center >= int(lip_crops.size()))
    throw UsageError("window center out of range");
  const int size = lip_crops.front().width;
  for (const auto& img : lip_crops)
    if (img.width != size || img.height != size)
      throw UsageError("lip crops must share a square size");

  LipWindow out;
  out.size = size;
  out.center_frame = center;
  out.pixels.resize(3 * window, Eigen::Index(size) * size);
  const int radius = window / 2;
  for (int f = 0; f < window; ++f) {
    const int idx =
        std::clamp(center - radius + f, 0, int(lip_crops.size()) - 1);
    const Image& img = lip_crops[size_t(idx)];
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const float* px = img.at(x, y);
        for (int c = 0; c < 3; ++c)
          out.pixels(3 * f + c, Eigen::Index(y) * size + x) = px[c];
      }
  }
  return out;
}

std::pair<int, int> synthetic_tone_bins(int phoneme_id) {
  return {10 + 4 * phoneme_id, 120 + 5 * phoneme_id};
}

Corpus generate_synthetic_corpus(int n_clips, const PhonemeInventory& inventory,
                                 uint64_t seed, const SyntheticConfig& cfg) {
  if (inventory.num_viseme_classes() < 2)
    throw UsageError("inventory needs at least 2 viseme classes");
  bool has_shared_pair = false;
  for (size_t i = 0; i < inventory.size() && !has_shared_pair; ++i)
    for (size_t j = i + 1; j < inventory.size(); ++j)
      if (inventory.viseme_class[i] == inventory.viseme_class[j]) {
        has_shared_pair = true;
        break;
      }
  if (!has_shared_pair)
    throw UsageError("inventory needs at least one viseme-sharing pair");

  Corpus corpus;
  corpus.inventory = inventory;
  corpus.sample_rate = cfg.sample_rate;
  corpus.fps = cfg.fps;

  Rng root(seed);
  for (int c = 0; c < n_clips; ++c) {
    Rng rng = root.fork(0xc11b, uint64_t(c));
    Clip clip;
    char idbuf[32];
    std::snprintf(idbuf, sizeof idbuf, "clip_%04d", c);
    clip.id = idbuf;

    const int phoneme_id = c % int(inventory.size());
    const int viseme = inventory.viseme_class[size_t(phoneme_id)];
    const int dur_ms =
        cfg.min_dur_ms + int(rng.index(size_t(cfg.max_dur_ms - cfg.min_dur_ms + 1)));
    const double dur_s = double(dur_ms) / 1000.0;
    clip.intervals = {{inventory.labels[size_t(phoneme_id)], 0.0, dur_s}};

    // audio: phoneme-identifying tones at exact bin centers plus noise
    const auto [b1, b2] = synthetic_tone_bins(phoneme_id);
    const double f1 = double(b1) * cfg.sample_rate / cfg.n_fft;
    const double f2 = double(b2) * cfg.sample_rate / cfg.n_fft;
    const long n_samples = std::lround(dur_s * cfg.sample_rate);
    clip.audio.resize(size_t(n_samples));
    for (long n = 0; n < n_samples; ++n) {
      const double t = double(n) / cfg.sample_rate;
      double v = cfg.tone_amp * std::sin(2 * kPi * f1 * t) +
                 cfg.tone_amp * std::sin(2 * kPi * f2 * t) +
                 cfg.noise_amp * rng.uniform(-1, 1);
      clip.audio[size_t(n)] = quantize_i16(v);
    }

    // frames: class-identifying ellipse lips with per-frame jitter
    const int n_frames = int(std::ceil(dur_s * cfg.fps - 1e-9));
    const double ap_class = cfg.aperture_base + cfg.aperture_gap * viseme;
    const double hw_class = cfg.halfwidth_base + cfg.halfwidth_gap * viseme;
    for (int f = 0; f < std::max(n_frames, 1); ++f) {
      const double ap = ap_class + cfg.jitter_px * rng.uniform(-1, 1);
      const double hw = hw_class + cfg.jitter_px * rng.uniform(-1, 1);
      clip.frames.push_back(render_mouth_frame(cfg, ap, hw));
      clip.landmarks.push_back(make_landmarks(cfg, ap, hw));
    }
    corpus.clips.push_back(std::move(clip));
  }
  return corpus;
}

void write_corpus(const Corpus& corpus, const std::string& dir) {
  if (corpus.fps != 25.0)
    throw UsageError("corpus manifest assumes 25 fps");
  fs::create_directories(dir);
  {
    std::ofstream inv(dir + "/inventory.tsv", std::ios::trunc);
    if (!inv) throw DataError("cannot write inventory: " + dir);
    for (size_t i = 0; i < corpus.inventory.size(); ++i)
      inv << corpus.inventory.labels[i] << '\t'
          << corpus.inventory.viseme_class[i] << '\n';
  }
  for (const auto& clip : corpus.clips) {
    const std::string cdir = dir + "/" + clip.id;
    fs::create_directories(cdir);
    write_wav(cdir + "/audio.wav", corpus.sample_rate, clip.audio);
    for (size_t f = 0; f < clip.frames.size(); ++f) {
      char name[32];
      std::snprintf(name, sizeof name, "frame_%03zu.png", f);
      write_png(cdir + "/" + name, clip.frames[f]);
    }
    {
      std::ofstream lm(cdir + "/landmarks.txt", std::ios::trunc);
      for (const auto& marks : clip.landmarks)
        for (const auto& p : marks) {
          char buf[64];
          std::snprintf(buf, sizeof buf, "%.4f %.4f\n", p.x, p.y);
          lm << buf;
        }
    }
    {
      std::ofstream al(cdir + "/alignment.tsv", std::ios::trunc);
      for (const auto& iv : clip.intervals) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "%s\t%.6f\t%.6f\n", iv.phoneme.c_str(),
                      iv.start_s, iv.end_s);
        al << buf;
      }
    }
  }
}

Corpus load_corpus(const std::string& dir, const PhonemeInventory* inventory) {
  Corpus corpus;
  if (inventory) {
    corpus.inventory = *inventory;
  } else {
    std::ifstream inv(dir + "/inventory.tsv");
    if (!inv) throw DataError("missing inventory.tsv in corpus: " + dir);
    std::string label;
    int cls;
    while (inv >> label >> cls) {
      corpus.inventory.labels.push_back(label);
      corpus.inventory.viseme_class.push_back(cls);
    }
  }
  corpus.fps = 25.0;

  std::vector<std::string> clip_dirs;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_directory()) clip_dirs.push_back(entry.path().filename());
  std::sort(clip_dirs.begin(), clip_dirs.end());

  bool rate_set = false;
  for (const auto& id : clip_dirs) {
    const std::string cdir = dir + "/" + id;
    if (!fs::exists(cdir + "/audio.wav")) continue;
    Clip clip;
    clip.id = id;
    WavData wav = read_wav(cdir + "/audio.wav");
    if (!rate_set) {
      corpus.sample_rate = wav.sample_rate;
      rate_set = true;
    } else if (wav.sample_rate != corpus.sample_rate) {
      throw DataError("mixed sample rates in corpus: " + cdir);
    }
    clip.audio = std::move(wav.samples);
    std::vector<std::string> frame_files;
    for (const auto& entry : fs::directory_iterator(cdir)) {
      const std::string name = entry.path().filename();
      if (name.size() > 4 && name.substr(name.size() - 4) == ".png")
        frame_files.push_back(name);
    }
    std::sort(frame_files.begin(), frame_files.end());
    for (const auto& name : frame_files)
      clip.frames.push_back(read_png(cdir + "/" + name));
    clip.landmarks = parse_landmarks(cdir + "/landmarks.txt");
    if (clip.landmarks.size() != clip.frames.size())
      throw DataError(cdir + ": landmark frame count does not match frames");
    clip.intervals = parse_alignment(cdir + "/alignment.tsv", &corpus.inventory);
    corpus.clips.push_back(std::move(clip));
  }
  if (corpus.clips.empty()) throw DataError("no clips found in corpus: " + dir);
  return corpus;
}

bool Clip::operator==(const Clip& o) const {
  if (id != o.id || audio != o.audio || intervals != o.intervals) return false;
  if (frames.size() != o.frames.size() || landmarks.size() != o.landmarks.size())
    return false;
  for (size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].width != o.frames[i].width ||
        frames[i].height != o.frames[i].height ||
        frames[i].pixels != o.frames[i].pixels)
      return false;
  }
  for (size_t i = 0; i < landmarks.size(); ++i)
    for (size_t j = 0; j < 68; ++j)
      if (landmarks[i][j].x != o.landmarks[i][j].x ||
          landmarks[i][j].y != o.landmarks[i][j].y)
        return false;
  return true;
}

bool Corpus::operator==(const Corpus& o) const {
  return inventory == o.inventory && sample_rate == o.sample_rate &&
         fps == o.fps && clips == o.clips;
}

PreparedCorpus prepare_corpus(const Corpus& corpus,
                              const FrontendConfig& frontend, int crop_size,
                              int window) {
  PreparedCorpus prep;
  prep.inventory = corpus.inventory;
  prep.bins = frontend.bins();
  for (const auto& clip : corpus.clips) {
    std::vector<Image> crops;
    crops.reserve(clip.frames.size());
    for (size_t f = 0; f < clip.frames.size(); ++f)
      crops.push_back(crop_lips(clip.frames[f], clip.landmarks[f], crop_size));
    const auto segments =
        segment_clip(clip.audio, int(clip.frames.size()), corpus.fps,
                     clip.intervals, corpus.sample_rate, corpus.inventory,
                     clip.id);
    for (const auto& seg : segments) {
      PreparedSegment ps;
      ps.phoneme_id = seg.phoneme_id;
      ps.viseme_class = corpus.inventory.viseme_class[size_t(seg.phoneme_id)];
      ps.clip_id = seg.clip_id;
      ps.spec = make_spectrogram(seg.audio, frontend).values.cast<float>();
      for (int f : seg.frame_indices)
        ps.windows.push_back(build_window(crops, f, window));
      prep.segments.push_back(std::move(ps));
    }
  }
  return prep;
}

AlignmentBatch sample_batch(const PreparedCorpus& corpus, int batch_size,
                            int negatives_per_anchor, Rng rng) {
  if (corpus.num_viseme_classes() < 2) throw DataError("no valid negatives");
  const size_t n = corpus.segments.size();
  if (n == 0) throw DataError("empty corpus");

  AlignmentBatch batch;
  batch.anchors.resize(size_t(batch_size));
  batch.negatives.resize(size_t(batch_size));
  for (int i = 0; i < batch_size; ++i) {
    const int anchor = int(rng.index(n));
    batch.anchors[size_t(i)] = anchor;
    const int anchor_class = corpus.segments[size_t(anchor)].viseme_class;
    bool any_other = false;
    for (const auto& seg : corpus.segments)
      if (seg.viseme_class != anchor_class) {
        any_other = true;
        break;
      }
    if (!any_other) throw DataError("no valid negatives");
    for (int k = 0; k < negatives_per_anchor; ++k) {
      int neg = int(rng.index(n));
      while (corpus.segments[size_t(neg)].viseme_class == anchor_class)
        neg = int(rng.index(n));
      batch.negatives[size_t(i)].push_back(neg);
    }
  }
  return batch;
}

}  // namespace pase
