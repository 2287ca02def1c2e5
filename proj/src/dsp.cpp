#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "chanorm/dsp.hpp"
#include "chanorm/error.hpp"
#include "chanorm/simd.hpp"

namespace chanorm {

std::size_t FramingConfig::frame_samples() const {
  return static_cast<std::size_t>(std::llround(frame_len_ms * sample_rate / 1000.0));
}

std::size_t FramingConfig::hop_samples() const {
  return static_cast<std::size_t>(std::llround(hop_ms * sample_rate / 1000.0));
}

void FramingConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidConfig, msg); };
  if (sample_rate <= 0) fail("sample_rate must be positive");
  if (!(hop_ms > 0.0)) fail("hop_ms must be > 0");
  if (frame_len_ms < hop_ms) fail("frame_len_ms must be >= hop_ms");
  if (hop_samples() == 0) fail("hop_ms is shorter than one sample");
  if (fft_size == 0 || (fft_size & (fft_size - 1)) != 0) fail("fft_size must be a power of two");
  if (fft_size < frame_samples())
    fail("fft_size " + std::to_string(fft_size) + " is smaller than frame length " +
         std::to_string(frame_samples()));
  if (n_mels == 0) fail("n_mels must be >= 1");
  if (!(fmin_hz >= 0.0 && fmin_hz < fmax_hz && fmax_hz <= sample_rate / 2.0))
    fail("require 0 <= fmin_hz < fmax_hz <= sample_rate/2");
  if (!(preemphasis >= 0.0 && preemphasis < 1.0)) fail("preemphasis must be in [0, 1)");
  if (!(dither >= 0.0)) fail("dither must be >= 0");
}

std::vector<double> make_window(WindowType type, std::size_t length) {
  std::vector<double> w(length, 1.0);
  if (length < 2) return w;
  const double denom = static_cast<double>(length - 1);
  for (std::size_t n = 0; n < length; ++n) {
    const double c = std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / denom);
    w[n] = type == WindowType::hamming ? 0.54 - 0.46 * c : 0.5 - 0.5 * c;
  }
  return w;
}

Matrix frame_signal(const AudioBuffer& audio, const FramingConfig& cfg) {
  cfg.validate();
  const std::size_t len = cfg.frame_samples();
  const std::size_t hop = cfg.hop_samples();
  const std::size_t n = audio.samples.size();
  if (n < len)
    throw Error(ErrorKind::SignalTooShort, std::to_string(n) + " samples, need at least " +
                                               std::to_string(len) + " for one frame");
  const std::size_t frames = (n - len) / hop + 1;
  const std::vector<double> window = make_window(cfg.window, len);
  Matrix out(frames, len);
  for (std::size_t t = 0; t < frames; ++t) {
    auto row = out.row(t);
    const double* src = audio.samples.data() + t * hop;
    for (std::size_t i = 0; i < len; ++i) row[i] = src[i] * window[i];
  }
  return out;
}

namespace detail {

void fft_inplace(std::span<double> data) {
  const std::size_t n = data.size() / 2;
  if (n <= 1) return;
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(data[2 * i], data[2 * j]);
      std::swap(data[2 * i + 1], data[2 * j + 1]);
    }
  }
  // Twiddles for the largest stage; smaller stages stride through it.
  std::vector<double> cos_table(n / 2), sin_table(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    cos_table[k] = std::cos(angle);
    sin_table[k] = std::sin(angle);
  }
  for (std::size_t size = 2; size <= n; size <<= 1) {
    const std::size_t half = size / 2;
    const std::size_t stride = n / size;
    for (std::size_t start = 0; start < n; start += size) {
      for (std::size_t k = 0; k < half; ++k) {
        const double wr = cos_table[k * stride];
        const double wi = sin_table[k * stride];
        const std::size_t a = 2 * (start + k);
        const std::size_t b = 2 * (start + k + half);
        const double tr = data[b] * wr - data[b + 1] * wi;
        const double ti = data[b] * wi + data[b + 1] * wr;
        data[b] = data[a] - tr;
        data[b + 1] = data[a + 1] - ti;
        data[a] += tr;
        data[a + 1] += ti;
      }
    }
  }
}

}  // namespace detail

Matrix power_spectrum(const Matrix& frames, const FramingConfig& cfg) {
  cfg.validate();
  const std::size_t nfft = cfg.fft_size;
  if (frames.cols() > nfft)
    throw Error(ErrorKind::ShapeMismatch, "frame length " + std::to_string(frames.cols()) +
                                              " exceeds fft_size " + std::to_string(nfft));
  const auto& k = simd::active();
  Matrix out(frames.rows(), cfg.num_bins());
  std::vector<double> buf(2 * nfft);
  for (std::size_t t = 0; t < frames.rows(); ++t) {
    std::fill(buf.begin(), buf.end(), 0.0);
    const auto row = frames.row(t);
    for (std::size_t i = 0; i < row.size(); ++i) buf[2 * i] = row[i];
    detail::fft_inplace(buf);
    k.abs2(std::span<const double>(buf).first(2 * cfg.num_bins()), out.row(t));
  }
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank::MelFilterbank(const FramingConfig& cfg) : cfg_(cfg) {
  cfg.validate();
  const std::size_t nbins = cfg.num_bins();
  const double mel_lo = hz_to_mel(cfg.fmin_hz);
  const double mel_hi = hz_to_mel(cfg.fmax_hz);
  const double step = (mel_hi - mel_lo) / static_cast<double>(cfg.n_mels + 1);
  const double bin_hz = static_cast<double>(cfg.sample_rate) / static_cast<double>(cfg.fft_size);

  std::vector<double> bin_mel(nbins);
  for (std::size_t k = 0; k < nbins; ++k) bin_mel[k] = hz_to_mel(static_cast<double>(k) * bin_hz);

  filters_.resize(cfg.n_mels);
  centers_hz_.resize(cfg.n_mels);
  for (std::size_t f = 0; f < cfg.n_mels; ++f) {
    const double left = mel_lo + step * static_cast<double>(f);
    const double center = left + step;
    const double right = center + step;
    centers_hz_[f] = mel_to_hz(center);
    std::size_t first = nbins;
    std::size_t last = 0;
    std::vector<double> dense(nbins, 0.0);
    for (std::size_t k = 0; k < nbins; ++k) {
      const double m = bin_mel[k];
      double w = 0.0;
      if (m > left && m <= center)
        w = (m - left) / (center - left);
      else if (m > center && m < right)
        w = (right - m) / (right - center);
      if (w > 0.0) {
        dense[k] = w;
        first = std::min(first, k);
        last = std::max(last, k);
      }
    }
    MelFilter& filt = filters_[f];
    if (first <= last) {
      filt.first_bin = first;
      filt.weights.assign(dense.begin() + static_cast<std::ptrdiff_t>(first),
                          dense.begin() + static_cast<std::ptrdiff_t>(last + 1));
    }
  }
}

double MelFilterbank::weight(std::size_t f, std::size_t k) const {
  const MelFilter& filt = filters_[f];
  if (k < filt.first_bin || k >= filt.first_bin + filt.weights.size()) return 0.0;
  return filt.weights[k - filt.first_bin];
}

MelEnergies MelFilterbank::apply(const Matrix& power) const {
  if (power.cols() != cfg_.num_bins())
    throw Error(ErrorKind::ShapeMismatch, "spectrum has " + std::to_string(power.cols()) +
                                              " bins, expected " + std::to_string(cfg_.num_bins()));
  const auto& k = simd::active();
  MelEnergies out{Matrix(power.rows(), filters_.size()), cfg_};
  for (std::size_t t = 0; t < power.rows(); ++t) {
    const auto spectrum = power.row(t);
    auto dst = out.values.row(t);
    for (std::size_t f = 0; f < filters_.size(); ++f) {
      const MelFilter& filt = filters_[f];
      dst[f] = k.dot(filt.weights, spectrum.subspan(filt.first_bin, filt.weights.size()));
    }
  }
  return out;
}

MelEnergies apply_mel(const Matrix& power, const FramingConfig& cfg) {
  return MelFilterbank(cfg).apply(power);
}

MelEnergies compute_mel_energies(const AudioBuffer& audio, const FramingConfig& cfg) {
  cfg.validate();
  if (audio.sample_rate != cfg.sample_rate)
    throw Error(ErrorKind::InvalidConfig, "audio sample rate " + std::to_string(audio.sample_rate) +
                                              " does not match config " +
                                              std::to_string(cfg.sample_rate));
  const AudioBuffer* src = &audio;
  AudioBuffer conditioned;
  if (cfg.dither > 0.0 || cfg.preemphasis > 0.0) {
    conditioned = audio;
    auto& x = conditioned.samples;
    if (cfg.dither > 0.0) {
      std::mt19937_64 rng(cfg.dither_seed);
      std::normal_distribution<double> noise(0.0, cfg.dither);
      for (double& v : x) v += noise(rng);
    }
    if (cfg.preemphasis > 0.0 && !x.empty()) {
      for (std::size_t i = x.size() - 1; i > 0; --i) x[i] -= cfg.preemphasis * x[i - 1];
      x[0] -= cfg.preemphasis * x[0];
    }
    src = &conditioned;
  }
  return MelFilterbank(cfg).apply(power_spectrum(frame_signal(*src, cfg), cfg));
}

}  // namespace chanorm
