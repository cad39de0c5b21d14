#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pase/config_file.hpp"
#include "pase/model.hpp"

namespace pase {

/// On-disk checkpoint: magic "PCKP", u32 version, u64 step, a length-prefixed
/// config snapshot (the sectioned text format), then named parameter tensors
/// as (u16 name length, name, u32 rows, u32 cols, rows*cols little-endian
/// 32-bit floats, column-major). Optimizer state rides along under
/// "adam.m.*" / "adam.v.*" names plus an "adam.t" scalar.
struct CheckpointData {
  uint64_t step = 0;
  ConfigFile config;
  std::vector<std::pair<std::string, MatF>> tensors;

  const MatF* find(const std::string& name) const;
};

void write_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData read_checkpoint(const std::string& path);

/// Assembles checkpoint tensors from a model (and optionally Adam moments).
template <class AdamT>
CheckpointData make_checkpoint(Model<float>& model, AdamT* adam, uint64_t step,
                               const ConfigFile& config) {
  CheckpointData data;
  data.step = step;
  data.config = config;
  model.cfg.to_config(data.config);
  model.visit_params([&](const std::string& name, MatF& p) {
    data.tensors.emplace_back(name, p);
  });
  if (adam) {
    size_t i = 0;
    model.visit_params([&](const std::string& name, MatF&) {
      data.tensors.emplace_back("adam.m." + name, adam->first_moments()[i]);
      data.tensors.emplace_back("adam.v." + name, adam->second_moments()[i]);
      ++i;
    });
    MatF t(1, 1);
    t(0, 0) = float(adam->t());
    data.tensors.emplace_back("adam.t", t);
  }
  return data;
}

/// Rebuilds the model from a checkpoint's config snapshot and tensors.
Model<float> model_from_checkpoint(const CheckpointData& data);

/// Restores Adam moments saved alongside the model; returns false when the
/// checkpoint carries no optimizer state.
template <class AdamT>
bool restore_adam(const CheckpointData& data, Model<float>& model, AdamT& adam) {
  const MatF* t = data.find("adam.t");
  if (!t) return false;
  size_t i = 0;
  bool ok = true;
  model.visit_params([&](const std::string& name, MatF&) {
    const MatF* m = data.find("adam.m." + name);
    const MatF* v = data.find("adam.v." + name);
    if (!m || !v) {
      ok = false;
      return;
    }
    adam.first_moments()[i] = *m;
    adam.second_moments()[i] = *v;
    ++i;
  });
  if (!ok) throw DataError("checkpoint optimizer state is incomplete");
  adam.set_t(long((*t)(0, 0)));
  return true;
}

}  // namespace pase
