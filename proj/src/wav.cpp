#include "pase/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "pase/common.hpp"

namespace pase {

namespace {

uint32_t read_u32(const char* p) {
  return uint32_t(uint8_t(p[0])) | uint32_t(uint8_t(p[1])) << 8 |
         uint32_t(uint8_t(p[2])) << 16 | uint32_t(uint8_t(p[3])) << 24;
}

uint16_t read_u16(const char* p) {
  return uint16_t(uint8_t(p[0])) | uint16_t(uint8_t(p[1])) << 8;
}

void put_u32(std::string& s, uint32_t v) {
  s.push_back(char(v & 0xff));
  s.push_back(char((v >> 8) & 0xff));
  s.push_back(char((v >> 16) & 0xff));
  s.push_back(char((v >> 24) & 0xff));
}

void put_u16(std::string& s, uint16_t v) {
  s.push_back(char(v & 0xff));
  s.push_back(char((v >> 8) & 0xff));
}

}  // namespace

WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open wav file: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 ||
      bytes.compare(8, 4, "WAVE") != 0) {
    throw DataError("not a RIFF/WAVE file: " + path);
  }

  WavData out;
  int channels = 0, bits = 0;
  bool have_fmt = false;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id = bytes.substr(pos, 4);
    const uint32_t size = read_u32(bytes.data() + pos + 4);
    pos += 8;
    if (pos + size > bytes.size()) throw DataError("truncated wav chunk: " + path);
    if (id == "fmt ") {
      if (size < 16) throw DataError("malformed fmt chunk: " + path);
      const uint16_t format = read_u16(bytes.data() + pos);
      channels = read_u16(bytes.data() + pos + 2);
      out.sample_rate = int(read_u32(bytes.data() + pos + 4));
      bits = read_u16(bytes.data() + pos + 14);
      if (format != 1) throw DataError("unsupported wav encoding (PCM required): " + path);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw DataError("wav data chunk before fmt: " + path);
      if (channels != 1) throw DataError("multi-channel input rejected: " + path);
      if (bits != 16) throw DataError("unsupported sample width (16-bit required): " + path);
      const size_t n = size / 2;
      out.samples.resize(n);
      for (size_t i = 0; i < n; ++i) {
        const int16_t v = int16_t(read_u16(bytes.data() + pos + 2 * i));
        out.samples[i] = double(v) / 32768.0;
      }
      return out;
    }
    pos += size + (size & 1);  // chunks are word-aligned
  }
  throw DataError("wav file has no data chunk: " + path);
}

void write_wav(const std::string& path, int sample_rate,
               const std::vector<double>& samples) {
  std::string data;
  data.reserve(samples.size() * 2);
  for (double x : samples) {
    const double clamped = std::clamp(x, -1.0, 1.0);
    int v = int(std::lround(clamped * 32768.0));
    v = std::clamp(v, -32768, 32767);
    put_u16(data, uint16_t(int16_t(v)));
  }

  std::string out;
  out.reserve(44 + data.size());
  out += "RIFF";
  put_u32(out, uint32_t(36 + data.size()));
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, uint32_t(sample_rate));
  put_u32(out, uint32_t(sample_rate * 2));
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, uint32_t(data.size()));
  out += data;

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write wav file: " + path);
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) throw DataError("short write: " + path);
}

}  // namespace pase
