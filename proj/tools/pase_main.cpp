// pase: phoneme-aware speech encoder pipeline.
//
// Subcommands: synth-data, train, eval, extract, project,
// inspect-checkpoint. Exit codes: 0 success, 1 usage error, 2 data error,
// 3 numerical divergence. Diagnostics go to stderr, results to stdout.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <set>
#include <string>

#include "pase/checkpoint.hpp"
#include "pase/corpus.hpp"
#include "pase/evaluation.hpp"
#include "pase/trainer.hpp"
#include "pase/wav.hpp"

namespace {

using namespace pase;

/// Keys accepted in config files; unknown keys are rejected.
void validate_config_keys(const ConfigFile& cfg) {
  static const std::set<std::string> known = {
      "train.learning_rate",  "train.batch_size",
      "train.window",         "train.steps",
      "train.mask_ratio",     "train.tau",
      "train.alpha",          "train.seed",
      "train.encoder",        "train.pooling",
      "train.embed_dim",      "train.gru_layers",
      "train.heads",          "train.crop_size",
      "train.negatives_per_anchor", "train.checkpoint_every",
      "frontend.variant",     "frontend.scale",
      "frontend.sample_rate_hz", "frontend.n_fft",
      "frontend.win_length",  "frontend.hop_length",
      "frontend.n_mels",      "corpus.clips",
      "corpus.inventory",     "synthetic.min_dur_ms",
      "synthetic.max_dur_ms", "synthetic.jitter_px",
      "synthetic.aperture_gap", "eval.k",
      "paths.out",            "paths.ckpt",
      "paths.audio",          "paths.corpus",
  };
  for (const auto& [section, key] : cfg.keys()) {
    if (!known.count(section + "." + key))
      throw UsageError("unknown config key [" + section + "] " + key);
  }
}

ConfigFile load_config(const std::string& path) {
  if (path.empty()) return ConfigFile{};
  ConfigFile cfg = ConfigFile::parse_file(path);
  validate_config_keys(cfg);
  return cfg;
}

PhonemeInventory inventory_from_config(const ConfigFile& cfg) {
  const std::string name = cfg.get_or("corpus", "inventory", "consonants8");
  if (name == "consonants8") return PhonemeInventory::small_consonant_groups();
  if (name == "consonants") return PhonemeInventory::consonant_groups();
  throw UsageError("unknown inventory: " + name);
}

std::string resolve_path(const ConfigFile& cfg, const std::string& flag_value,
                         const std::string& key, bool required,
                         const std::string& what) {
  if (!flag_value.empty()) return flag_value;
  const std::string v = cfg.get_or("paths", key, "");
  if (v.empty() && required) throw UsageError("missing required " + what);
  return v;
}

struct CommonFlags {
  std::string config, out, ckpt, audio, corpus, frontend, encoder;
  long seed = -1;
  long steps = -1;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "config file (key = value sections)");
  cmd->add_option("--seed", f.seed, "RNG seed");
}

TrainConfig train_config_from(const ConfigFile& file_cfg, const CommonFlags& f) {
  TrainConfig cfg = TrainConfig::from_config(file_cfg);
  if (f.seed >= 0) cfg.seed = uint64_t(f.seed);
  if (f.steps >= 0) cfg.steps = f.steps;
  if (!f.frontend.empty()) cfg.frontend.variant = parse_variant(f.frontend);
  if (!f.encoder.empty()) cfg.encoder = parse_encoder(f.encoder);
  return cfg;
}

void print_metrics_line(const StepMetrics& m) {
  std::printf("step=%ld total=%.9g con=%.9g rec=%.9g\n", m.step, m.total, m.con,
              m.rec);
}

int cmd_synth_data(const CommonFlags& f, long clips) {
  const ConfigFile cfg = load_config(f.config);
  const long n = clips >= 0 ? clips
                            : (cfg.has("corpus", "clips")
                                   ? cfg.get_long("corpus", "clips")
                                   : 50);
  const uint64_t seed = f.seed >= 0 ? uint64_t(f.seed) : 7;
  const std::string out = resolve_path(cfg, f.out, "out", true, "--out");

  SyntheticConfig syn;
  if (cfg.has("synthetic", "min_dur_ms"))
    syn.min_dur_ms = int(cfg.get_long("synthetic", "min_dur_ms"));
  if (cfg.has("synthetic", "max_dur_ms"))
    syn.max_dur_ms = int(cfg.get_long("synthetic", "max_dur_ms"));
  if (cfg.has("synthetic", "jitter_px"))
    syn.jitter_px = cfg.get_double("synthetic", "jitter_px");
  if (cfg.has("synthetic", "aperture_gap"))
    syn.aperture_gap = cfg.get_double("synthetic", "aperture_gap");

  const PhonemeInventory inventory = inventory_from_config(cfg);
  const Corpus corpus = generate_synthetic_corpus(int(n), inventory, seed, syn);
  write_corpus(corpus, out);
  std::printf("clips=%ld phonemes=%zu viseme_classes=%d out=%s\n", n,
              inventory.size(), inventory.num_viseme_classes(), out.c_str());
  return 0;
}

int cmd_train(const CommonFlags& f) {
  const ConfigFile file_cfg = load_config(f.config);
  TrainConfig cfg = train_config_from(file_cfg, f);
  const std::string corpus_dir =
      resolve_path(file_cfg, f.corpus, "corpus", true, "--corpus");
  cfg.checkpoint_path = resolve_path(file_cfg, f.out, "out", true, "--out");

  std::cerr << "loading corpus from " << corpus_dir << "\n";
  const Corpus corpus = load_corpus(corpus_dir);
  const PreparedCorpus prepared =
      prepare_corpus(corpus, cfg.frontend, cfg.crop_size, cfg.window);
  std::cerr << "prepared " << prepared.segments.size() << " segments\n";

  const TrainResult result =
      train(cfg, prepared, [](const StepMetrics& m, Model<float>&) {
        print_metrics_line(m);
        return true;
      });
  std::printf("checkpoint=%s\n", result.checkpoint_path.c_str());
  return 0;
}

int cmd_eval(const CommonFlags& f, long k_flag) {
  const ConfigFile file_cfg = load_config(f.config);
  const std::string ckpt =
      resolve_path(file_cfg, f.ckpt, "ckpt", true, "--ckpt");
  const std::string corpus_dir =
      resolve_path(file_cfg, f.corpus, "corpus", true, "--corpus");
  const long k = k_flag >= 0 ? k_flag
                             : (file_cfg.has("eval", "k")
                                    ? file_cfg.get_long("eval", "k")
                                    : 4);
  const uint64_t seed = f.seed >= 0 ? uint64_t(f.seed) : 1;

  const CheckpointData data = read_checkpoint(ckpt);
  Model<float> model = model_from_checkpoint(data);
  const TrainConfig saved = TrainConfig::from_config(data.config);
  const Corpus corpus = load_corpus(corpus_dir);
  const PreparedCorpus prepared = prepare_corpus(
      corpus, saved.frontend, model.cfg.visual_input_size, model.cfg.window);

  const double acc = retrieval_accuracy(model, prepared, int(k), seed);
  std::printf("retrieval_accuracy=%.6f k=%ld segments=%zu\n", acc, k,
              prepared.segments.size());

  std::vector<std::pair<std::string, std::string>> pairs;
  const auto& inv = prepared.inventory;
  for (size_t i = 0; i < inv.size(); ++i)
    for (size_t j = i + 1; j < inv.size(); ++j)
      pairs.emplace_back(inv.labels[i], inv.labels[j]);
  const AmbiguityReport report = ambiguity_report(model, prepared, pairs);
  std::fputs(report.to_text().c_str(), stdout);
  return 0;
}

int cmd_extract(const CommonFlags& f) {
  const ConfigFile file_cfg = load_config(f.config);
  const std::string ckpt =
      resolve_path(file_cfg, f.ckpt, "ckpt", true, "--ckpt");
  const std::string audio_path =
      resolve_path(file_cfg, f.audio, "audio", true, "--audio");
  const std::string out = resolve_path(file_cfg, f.out, "out", true, "--out");

  const CheckpointData data = read_checkpoint(ckpt);
  Model<float> model = model_from_checkpoint(data);
  const TrainConfig saved = TrainConfig::from_config(data.config);
  const WavData wav = read_wav(audio_path);
  if (wav.sample_rate != saved.frontend.sample_rate_hz)
    throw DataError("audio sample rate does not match the model's frontend");

  FeatureTrack track = extract_features(wav.samples, model, saved.frontend);
  track.source_audio = audio_path;
  export_features(track, out);
  std::printf("frames=%ld dim=%d fps=%d out=%s\n", long(track.frames.rows()),
              track.dim, track.fps, out.c_str());
  return 0;
}

int cmd_project(const CommonFlags& f) {
  const ConfigFile file_cfg = load_config(f.config);
  const std::string ckpt =
      resolve_path(file_cfg, f.ckpt, "ckpt", true, "--ckpt");
  const std::string corpus_dir =
      resolve_path(file_cfg, f.corpus, "corpus", true, "--corpus");
  const std::string out = resolve_path(file_cfg, f.out, "out", true, "--out");

  const CheckpointData data = read_checkpoint(ckpt);
  Model<float> model = model_from_checkpoint(data);
  const TrainConfig saved = TrainConfig::from_config(data.config);
  const Corpus corpus = load_corpus(corpus_dir);
  const PreparedCorpus prepared = prepare_corpus(
      corpus, saved.frontend, model.cfg.visual_input_size, model.cfg.window);
  if (prepared.segments.empty()) throw DataError("empty corpus");

  const SegmentScorer scorer = model_scorer(model);
  MatD embeddings(Eigen::Index(prepared.segments.size()), model.cfg.embed_dim);
  std::vector<std::string> labels;
  for (size_t s = 0; s < prepared.segments.size(); ++s) {
    embeddings.row(Eigen::Index(s)) =
        scorer.anchor(prepared.segments[s]).cast<double>().transpose();
    labels.push_back(
        prepared.inventory.labels[size_t(prepared.segments[s].phoneme_id)]);
  }
  const Projection proj = project_embeddings(embeddings);
  write_scatter_svg(out, proj.points, labels);
  std::printf("points=%ld out=%s\n", long(proj.points.rows()), out.c_str());
  return 0;
}

int cmd_inspect(const CommonFlags& f) {
  const ConfigFile file_cfg = load_config(f.config);
  const std::string ckpt =
      resolve_path(file_cfg, f.ckpt, "ckpt", true, "--ckpt");
  const CheckpointData data = read_checkpoint(ckpt);
  std::printf("step=%llu\n", (unsigned long long)data.step);
  size_t params = 0, tensors = 0;
  for (const auto& [name, t] : data.tensors) {
    if (name.rfind("adam.", 0) == 0) continue;
    ++tensors;
    params += size_t(t.size());
    std::printf("tensor=%s shape=%ldx%ld\n", name.c_str(), long(t.rows()),
                long(t.cols()));
  }
  std::printf("tensors=%zu parameters=%zu\n", tensors, params);
  std::fputs(data.config.serialize().c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PASE: phoneme-aware speech encoder"};
  app.require_subcommand(1);

  CommonFlags f;
  long clips = -1, k = -1;

  auto* synth = app.add_subcommand("synth-data", "generate a synthetic corpus");
  add_common(synth, f);
  synth->add_option("--clips", clips, "number of clips");
  synth->add_option("--out", f.out, "output corpus directory");

  auto* train_cmd = app.add_subcommand("train", "train on a corpus");
  add_common(train_cmd, f);
  train_cmd->add_option("--steps", f.steps, "training steps");
  train_cmd->add_option("--corpus", f.corpus, "corpus directory");
  train_cmd->add_option("--out", f.out, "checkpoint output path");
  train_cmd->add_option("--frontend", f.frontend, "stft|mel")
      ->check(CLI::IsMember({"stft", "mel"}));
  train_cmd->add_option("--encoder", f.encoder, "gru|cnn")
      ->check(CLI::IsMember({"gru", "cnn"}));

  auto* eval_cmd = app.add_subcommand("eval", "retrieval + ambiguity report");
  add_common(eval_cmd, f);
  eval_cmd->add_option("--ckpt", f.ckpt, "checkpoint path");
  eval_cmd->add_option("--corpus", f.corpus, "corpus directory");
  eval_cmd->add_option("--k", k, "distractors per segment");

  auto* extract_cmd = app.add_subcommand("extract", "export frame-rate features");
  add_common(extract_cmd, f);
  extract_cmd->add_option("--ckpt", f.ckpt, "checkpoint path");
  extract_cmd->add_option("--audio", f.audio, "input wav (16-bit mono PCM)");
  extract_cmd->add_option("--out", f.out, "output feature file");

  auto* project_cmd =
      app.add_subcommand("project", "PCA scatter of audio embeddings");
  add_common(project_cmd, f);
  project_cmd->add_option("--ckpt", f.ckpt, "checkpoint path");
  project_cmd->add_option("--corpus", f.corpus, "corpus directory");
  project_cmd->add_option("--out", f.out, "output svg path");

  auto* inspect_cmd =
      app.add_subcommand("inspect-checkpoint", "describe a checkpoint");
  add_common(inspect_cmd, f);
  inspect_cmd->add_option("--ckpt", f.ckpt, "checkpoint path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) return cmd_synth_data(f, clips);
    if (train_cmd->parsed()) return cmd_train(f);
    if (eval_cmd->parsed()) return cmd_eval(f, k);
    if (extract_cmd->parsed()) return cmd_extract(f);
    if (project_cmd->parsed()) return cmd_project(f);
    if (inspect_cmd->parsed()) return cmd_inspect(f);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
