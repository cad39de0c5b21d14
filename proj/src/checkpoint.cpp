#include "pase/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace pase {

namespace {

constexpr char kMagic[4] = {'P', 'C', 'K', 'P'};
constexpr uint32_t kVersion = 1;

void put_u16(std::string& s, uint16_t v) {
  s.push_back(char(v & 0xff));
  s.push_back(char((v >> 8) & 0xff));
}

void put_u32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& s, uint64_t v) {
  for (int i = 0; i < 8; ++i) s.push_back(char((v >> (8 * i)) & 0xff));
}

struct Reader {
  const std::string& bytes;
  size_t pos = 0;
  const std::string& path;

  void need(size_t n) const {
    if (pos + n > bytes.size())
      throw DataError("truncated checkpoint: " + path);
  }
  uint16_t u16() {
    need(2);
    uint16_t v = uint16_t(uint8_t(bytes[pos])) |
                 uint16_t(uint8_t(bytes[pos + 1])) << 8;
    pos += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(bytes[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(uint8_t(bytes[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  std::string str(size_t n) {
    need(n);
    std::string s = bytes.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

const MatF* CheckpointData::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

void write_checkpoint(const std::string& path, const CheckpointData& data) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u64(out, data.step);
  const std::string cfg = data.config.serialize();
  put_u32(out, uint32_t(cfg.size()));
  out += cfg;
  put_u32(out, uint32_t(data.tensors.size()));
  for (const auto& [name, t] : data.tensors) {
    put_u16(out, uint16_t(name.size()));
    out += name;
    put_u32(out, uint32_t(t.rows()));
    put_u32(out, uint32_t(t.cols()));
    const size_t bytes = size_t(t.size()) * sizeof(float);
    const size_t at = out.size();
    out.resize(at + bytes);
    std::memcpy(out.data() + at, t.data(), bytes);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write checkpoint: " + path);
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) throw DataError("short write: " + path);
}

CheckpointData read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  Reader r{bytes, 0, path};
  if (r.str(4) != std::string(kMagic, 4))
    throw DataError("bad checkpoint magic: " + path);
  if (r.u32() != kVersion)
    throw DataError("unsupported checkpoint version: " + path);
  CheckpointData data;
  data.step = r.u64();
  const uint32_t cfg_len = r.u32();
  data.config = ConfigFile::parse_string(r.str(cfg_len), path);
  const uint32_t n = r.u32();
  for (uint32_t i = 0; i < n; ++i) {
    const uint16_t name_len = r.u16();
    std::string name = r.str(name_len);
    const uint32_t rows = r.u32();
    const uint32_t cols = r.u32();
    MatF t(rows, cols);
    const size_t need = size_t(rows) * cols * sizeof(float);
    r.need(need);
    std::memcpy(t.data(), bytes.data() + r.pos, need);
    r.pos += need;
    data.tensors.emplace_back(std::move(name), std::move(t));
  }
  return data;
}

Model<float> model_from_checkpoint(const CheckpointData& data) {
  Model<float> model = Model<float>::init(ModelConfig::from_config(data.config), 0);
  model.visit_params([&](const std::string& name, MatF& p) {
    const MatF* t = data.find(name);
    if (!t) throw DataError("checkpoint missing tensor: " + name);
    if (t->rows() != p.rows() || t->cols() != p.cols())
      throw DataError("checkpoint tensor shape mismatch: " + name);
    p = *t;
  });
  return model;
}

}  // namespace pase
