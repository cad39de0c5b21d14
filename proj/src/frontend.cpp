#include "pase/frontend.hpp"

#include <cmath>
#include <complex>

namespace pase {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

/// In-place iterative radix-2 FFT.
void fft_pow2(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / double(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

void dft_naive(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  std::vector<std::complex<double>> out(n);
  for (size_t k = 0; k < n; ++k) {
    std::complex<double> acc(0, 0);
    for (size_t t = 0; t < n; ++t) {
      const double ang = -2.0 * kPi * double(k) * double(t) / double(n);
      acc += a[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  a = std::move(out);
}

MatD magnitude_frames(const std::vector<double>& samples,
                      const FrontendConfig& cfg) {
  if (samples.empty()) throw DataError("empty audio");
  for (double v : samples)
    if (!std::isfinite(v)) throw DataError("invalid samples");
  cfg.validate();

  std::vector<double> padded;
  const std::vector<double>* sig = &samples;
  if (long(samples.size()) < cfg.win_length) {
    padded = samples;
    padded.resize(size_t(cfg.win_length), 0.0);
    sig = &padded;
  }

  const long t_frames = (long(sig->size()) - cfg.win_length) / cfg.hop_length + 1;
  const int f_bins = cfg.n_fft / 2 + 1;

  std::vector<double> window(size_t(cfg.win_length));
  for (int i = 0; i < cfg.win_length; ++i)
    window[size_t(i)] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / cfg.win_length);

  MatD out(t_frames, f_bins);
  std::vector<std::complex<double>> buf(size_t(cfg.n_fft));
  for (long t = 0; t < t_frames; ++t) {
    const long off = t * cfg.hop_length;
    for (int i = 0; i < cfg.win_length; ++i)
      buf[size_t(i)] = {(*sig)[size_t(off + i)] * window[size_t(i)], 0.0};
    for (int i = cfg.win_length; i < cfg.n_fft; ++i) buf[size_t(i)] = {0.0, 0.0};
    if (is_pow2(cfg.n_fft))
      fft_pow2(buf);
    else
      dft_naive(buf);
    for (int f = 0; f < f_bins; ++f) out(t, f) = std::abs(buf[size_t(f)]);
  }
  return out;
}

MatD apply_scale(MatD m, SpecScale scale) {
  if (scale == SpecScale::log_magnitude)
    m = m.unaryExpr([](double v) { return std::log1p(v); });
  return m;
}

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

}  // namespace

void FrontendConfig::validate() const {
  if (sample_rate_hz <= 0 || n_fft <= 0 || win_length <= 0 || hop_length <= 0)
    throw UsageError("frontend config fields must be positive");
  if (win_length > n_fft)
    throw UsageError("win_length must not exceed n_fft");
  if (hop_length > win_length)
    throw UsageError("hop_length must not exceed win_length");
  if (variant == SpecVariant::mel) {
    if (n_mels <= 0) throw UsageError("n_mels must be positive");
    if (n_mels >= n_fft / 2 + 1)
      throw UsageError("n_mels must be below n_fft/2 + 1");
  }
}

long stft_frame_count(long n_samples, const FrontendConfig& cfg) {
  const long n = std::max(n_samples, long(cfg.win_length));
  return (n - cfg.win_length) / cfg.hop_length + 1;
}

Spectrogram stft_spectrogram(const std::vector<double>& samples,
                             const FrontendConfig& cfg) {
  Spectrogram s;
  s.values = apply_scale(magnitude_frames(samples, cfg), cfg.scale);
  s.frame_rate_hz = cfg.frame_rate_hz();
  s.variant = SpecVariant::stft;
  return s;
}

MatD mel_filterbank(const FrontendConfig& cfg) {
  const int f_bins = cfg.n_fft / 2 + 1;
  const double mel_lo = hz_to_mel(0.0);
  const double mel_hi = hz_to_mel(double(cfg.sample_rate_hz) / 2.0);
  std::vector<double> edges(size_t(cfg.n_mels) + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i)
    edges[size_t(i)] =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * double(i) / double(cfg.n_mels + 1));

  MatD fb = MatD::Zero(cfg.n_mels, f_bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[size_t(m)];
    const double mid = edges[size_t(m) + 1];
    const double hi = edges[size_t(m) + 2];
    for (int k = 0; k < f_bins; ++k) {
      const double f = double(k) * cfg.sample_rate_hz / cfg.n_fft;
      const double rise = (f - lo) / (mid - lo);
      const double fall = (hi - f) / (hi - mid);
      fb(m, k) = std::max(0.0, std::min(rise, fall));
    }
  }
  return fb;
}

Spectrogram mel_spectrogram(const std::vector<double>& samples,
                            const FrontendConfig& cfg) {
  FrontendConfig mel_cfg = cfg;
  mel_cfg.variant = SpecVariant::mel;
  mel_cfg.validate();
  const MatD mag = magnitude_frames(samples, mel_cfg);
  const MatD fb = mel_filterbank(mel_cfg);
  Spectrogram s;
  s.values = apply_scale(mag * fb.transpose(), mel_cfg.scale);
  s.frame_rate_hz = mel_cfg.frame_rate_hz();
  s.variant = SpecVariant::mel;
  return s;
}

Spectrogram make_spectrogram(const std::vector<double>& samples,
                             const FrontendConfig& cfg) {
  return cfg.variant == SpecVariant::mel ? mel_spectrogram(samples, cfg)
                                         : stft_spectrogram(samples, cfg);
}

SpecVariant parse_variant(const std::string& name) {
  if (name == "stft") return SpecVariant::stft;
  if (name == "mel") return SpecVariant::mel;
  throw UsageError("unknown frontend variant: " + name);
}

const char* variant_name(SpecVariant v) {
  return v == SpecVariant::stft ? "stft" : "mel";
}

SpecScale parse_scale(const std::string& name) {
  if (name == "log_magnitude") return SpecScale::log_magnitude;
  if (name == "magnitude") return SpecScale::magnitude;
  throw UsageError("unknown spectrogram scale: " + name);
}

const char* scale_name(SpecScale s) {
  return s == SpecScale::log_magnitude ? "log_magnitude" : "magnitude";
}

}  // namespace pase
