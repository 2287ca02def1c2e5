#pragma once

// Waveform to mel-energy conversion: WAV ingestion, framing, windowing, power
// spectrum and HTK mel filterbank.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "chanorm/matrix.hpp"

namespace chanorm {

struct AudioBuffer {
  std::vector<double> samples;  // normalized to [-1, 1]
  int sample_rate = 16000;
};

enum class WindowType { hamming, hann };
enum class MelScale { htk };

struct FramingConfig {
  int sample_rate = 16000;
  double frame_len_ms = 25.0;
  double hop_ms = 10.0;
  std::size_t fft_size = 512;
  std::size_t n_mels = 40;
  double fmin_hz = 20.0;
  double fmax_hz = 7600.0;
  WindowType window = WindowType::hamming;
  MelScale mel_scale = MelScale::htk;
  double preemphasis = 0.0;  // 0 disables
  double dither = 0.0;       // 0 disables; seeded, so still reproducible
  std::uint64_t dither_seed = 0;

  std::size_t frame_samples() const;
  std::size_t hop_samples() const;
  std::size_t num_bins() const { return fft_size / 2 + 1; }

  /// Throws Error(InvalidConfig) naming the violated constraint.
  void validate() const;
};

/// Time x channel filterbank energies E[t, f]; entries are >= 0.
struct MelEnergies {
  Matrix values;
  FramingConfig config;
};

/// Reads a RIFF/WAVE PCM16 mono file; samples are scaled by 1/32768.
AudioBuffer load_wav(const std::filesystem::path& path);
AudioBuffer parse_wav(std::span<const std::uint8_t> bytes);

/// Encodes samples as PCM16 mono (clipped, rounded to nearest).
std::vector<std::uint8_t> encode_wav(const AudioBuffer& audio);
void save_wav(const AudioBuffer& audio, const std::filesystem::path& path);

std::vector<double> make_window(WindowType type, std::size_t length);

/// T x frame_samples matrix of windowed frames; the tail remainder is dropped.
Matrix frame_signal(const AudioBuffer& audio, const FramingConfig& cfg);

/// |DFT|^2 of each zero-padded frame, non-negative frequency bins only.
Matrix power_spectrum(const Matrix& frames, const FramingConfig& cfg);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular filter with unit peak, stored as a dense run of bin weights.
struct MelFilter {
  std::size_t first_bin = 0;
  std::vector<double> weights;
};

class MelFilterbank {
 public:
  explicit MelFilterbank(const FramingConfig& cfg);

  std::size_t num_filters() const { return filters_.size(); }
  const MelFilter& filter(std::size_t f) const { return filters_[f]; }
  /// Dense weight of filter f at bin k.
  double weight(std::size_t f, std::size_t k) const;
  /// Center frequencies (Hz) of the filters.
  const std::vector<double>& centers_hz() const { return centers_hz_; }

  MelEnergies apply(const Matrix& power) const;

 private:
  FramingConfig cfg_;
  std::vector<MelFilter> filters_;
  std::vector<double> centers_hz_;
};

MelEnergies apply_mel(const Matrix& power, const FramingConfig& cfg);

/// frame_signal -> power_spectrum -> apply_mel, with optional pre-emphasis and
/// dither applied to the waveform first.
MelEnergies compute_mel_energies(const AudioBuffer& audio, const FramingConfig& cfg);

namespace detail {
/// In-place radix-2 complex FFT over interleaved (re, im) pairs.
void fft_inplace(std::span<double> interleaved);
}  // namespace detail

}  // namespace chanorm
