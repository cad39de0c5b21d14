#pragma once

#include <string>
#include <vector>

namespace pase {

struct WavData {
  int sample_rate = 0;
  std::vector<double> samples;  // mono, in [-1, 1)
};

/// Reads a mono 16-bit little-endian PCM WAV file. Multi-channel or
/// non-PCM-16 input is rejected.
WavData read_wav(const std::string& path);

/// Writes samples as mono 16-bit PCM. Values are clamped to [-1, 1] and
/// rounded; round-trips exactly for samples already of the form k/32768.
void write_wav(const std::string& path, int sample_rate,
               const std::vector<double>& samples);

}  // namespace pase
