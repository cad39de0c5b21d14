#pragma once

#include <string>
#include <vector>

#include "pase/common.hpp"

namespace pase {

enum class SpecScale { log_magnitude, magnitude };
enum class SpecVariant { stft, mel };

struct FrontendConfig {
  int sample_rate_hz = 16000;
  int n_fft = 512;
  int win_length = 512;
  int hop_length = 128;
  SpecScale scale = SpecScale::log_magnitude;
  SpecVariant variant = SpecVariant::stft;
  int n_mels = 80;

  int bins() const {
    return variant == SpecVariant::stft ? n_fft / 2 + 1 : n_mels;
  }
  double frame_rate_hz() const {
    return double(sample_rate_hz) / double(hop_length);
  }
  void validate() const;
};

struct Spectrogram {
  MatD values;  // T x F
  double frame_rate_hz = 0;
  SpecVariant variant = SpecVariant::stft;

  Eigen::Index frames() const { return values.rows(); }
  Eigen::Index bins() const { return values.cols(); }
};

/// Number of analysis frames for a signal of n samples: inputs shorter than
/// win_length are zero-padded up to it, then T = (n - win)/hop + 1 with no
/// center padding.
long stft_frame_count(long n_samples, const FrontendConfig& cfg);

Spectrogram stft_spectrogram(const std::vector<double>& samples,
                             const FrontendConfig& cfg);
Spectrogram mel_spectrogram(const std::vector<double>& samples,
                            const FrontendConfig& cfg);

Spectrogram make_spectrogram(const std::vector<double>& samples,
                             const FrontendConfig& cfg);

/// HTK-style triangular filterbank, n_mels x (n_fft/2 + 1). Exposed so the
/// matrix-product oracle can check mel_spectrogram against it.
MatD mel_filterbank(const FrontendConfig& cfg);

SpecVariant parse_variant(const std::string& name);
const char* variant_name(SpecVariant v);
SpecScale parse_scale(const std::string& name);
const char* scale_name(SpecScale s);

}  // namespace pase
