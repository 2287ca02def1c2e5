#include <algorithm>
#include <cmath>
#include <string>

#include "chanorm/error.hpp"
#include "chanorm/pcmn.hpp"
#include "chanorm/simd.hpp"

namespace chanorm {

namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_channels(const Matrix& x, std::size_t channels, const char* what) {
  if (x.cols() != channels)
    throw Error(ErrorKind::ShapeMismatch, std::string(what) + ": input has " +
                                              std::to_string(x.cols()) + " channels, parameters have " +
                                              std::to_string(channels));
}

void require_frames(const Matrix& x) {
  if (x.rows() == 0) throw Error(ErrorKind::EmptyInput, "feature matrix has no frames");
}

std::size_t clamp_frame(std::ptrdiff_t t, std::size_t frames) {
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(t, 0, static_cast<std::ptrdiff_t>(frames) - 1));
}

}  // namespace

void CmnConfig::validate() const {
  if (mode == CmnMode::sliding && window_half < 1)
    throw Error(ErrorKind::InvalidConfig, "sliding CMN requires window_half >= 1");
}

Matrix channel_means(const Matrix& x, const CmnConfig& cfg) {
  cfg.validate();
  require_frames(x);
  const std::size_t frames = x.rows();
  const std::size_t channels = x.cols();
  Matrix mu(frames, channels);
  if (cfg.mode == CmnMode::full_utterance) {
    std::vector<double> sum(channels, 0.0);
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t i = 0; i < channels; ++i) sum[i] += x(t, i);
    for (double& v : sum) v /= static_cast<double>(frames);
    for (std::size_t t = 0; t < frames; ++t) std::ranges::copy(sum, mu.row(t).begin());
    return mu;
  }
  // Direct windowed sums: no running-sum drift on long inputs.
  const std::size_t span = cfg.window();
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t first = t >= span ? t - span : 0;
    const double count = static_cast<double>(t - first + 1);
    for (std::size_t i = 0; i < channels; ++i) {
      double acc = 0.0;
      for (std::size_t m = first; m <= t; ++m) acc += x(m, i);
      mu(t, i) = acc / count;
    }
  }
  return mu;
}

Matrix cmn_apply(const Matrix& x, const CmnConfig& cfg) {
  const Matrix mu = channel_means(x, cfg);
  Matrix out(x.rows(), x.cols());
  for (std::size_t n = 0; n < x.size(); ++n) out.data()[n] = x.data()[n] - mu.data()[n];
  return out;
}

PcmnDirectParams PcmnDirectParams::broadcast(std::size_t channels, double beta, double alpha,
                                             double mu0) {
  return {std::vector<double>(channels, beta), std::vector<double>(channels, alpha),
          std::vector<double>(channels, mu0)};
}

void PcmnDirectParams::validate() const {
  const std::size_t n = beta.size();
  if (alpha.size() != n || mu0.size() != n)
    throw Error(ErrorKind::ShapeMismatch, "pcmn.beta/alpha/mu0 lengths " + std::to_string(n) + "/" +
                                              std::to_string(alpha.size()) + "/" +
                                              std::to_string(mu0.size()) + " differ");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(alpha[i] >= 0.0 && alpha[i] <= 1.0))
      throw Error(ErrorKind::InvalidParameter, "pcmn.alpha[" + std::to_string(i) + "] = " +
                                                   std::to_string(alpha[i]) +
                                                   " violates alpha in [0, 1]");
    if (!std::isfinite(beta[i]) || !std::isfinite(mu0[i]))
      throw Error(ErrorKind::InvalidParameter,
                  "pcmn.beta/mu0[" + std::to_string(i) + "] must be finite");
  }
}

Matrix pcmn_direct(const Matrix& x, const PcmnDirectParams& p, const CmnConfig& cfg) {
  p.validate();
  require_channels(x, p.channels(), "pcmn_direct");
  const Matrix mu = channel_means(x, cfg);
  Matrix out(x.rows(), x.cols());
  for (std::size_t t = 0; t < x.rows(); ++t)
    for (std::size_t i = 0; i < x.cols(); ++i)
      out(t, i) = p.beta[i] * x(t, i) - (p.alpha[i] * mu(t, i) + p.mu0[i]);
  return out;
}

PcmnSpliceParams PcmnSpliceParams::zeros(std::size_t channels) {
  return {Matrix(channels, channels * kSpliceContext), std::vector<double>(channels, 0.0)};
}

PcmnSpliceParams PcmnSpliceParams::from_direct(const PcmnDirectParams& direct) {
  direct.validate();
  const std::size_t channels = direct.channels();
  PcmnSpliceParams p = zeros(channels);
  const double taps = static_cast<double>(kSpliceContext);
  for (std::size_t i = 0; i < channels; ++i) {
    for (std::size_t c = 0; c < kSpliceContext; ++c) p.weights(i, i * kSpliceContext + c) = -direct.alpha[i] / taps;
    p.weights(i, i * kSpliceContext + kSpliceHalf) = direct.beta[i] - direct.alpha[i] / taps;
    p.bias[i] = 0.0 - direct.mu0[i];  // +0 rather than -0 for mu0 = 0
  }
  return p;
}

std::vector<double> PcmnSpliceParams::diagonal_block(std::size_t channel) const {
  const auto row = weights.row(channel);
  return {row.begin() + static_cast<std::ptrdiff_t>(channel * kSpliceContext),
          row.begin() + static_cast<std::ptrdiff_t>((channel + 1) * kSpliceContext)};
}

void PcmnSpliceParams::validate() const {
  const std::size_t channels = bias.size();
  if (weights.rows() != channels || weights.cols() != channels * kSpliceContext)
    throw Error(ErrorKind::ShapeMismatch, "pcmn.weights is " + shape(weights) + ", expected " +
                                              std::to_string(channels) + "x" +
                                              std::to_string(channels * kSpliceContext));
  for (double w : weights.data())
    if (!std::isfinite(w)) throw Error(ErrorKind::InvalidParameter, "pcmn.weights has a non-finite entry");
  for (double b : bias)
    if (!std::isfinite(b)) throw Error(ErrorKind::InvalidParameter, "pcmn.bias has a non-finite entry");
}

Matrix splice_frames(const Matrix& x) {
  const std::size_t frames = x.rows();
  const std::size_t channels = x.cols();
  Matrix y(frames, channels * kSpliceContext);
  for (std::size_t t = 0; t < frames; ++t) {
    auto dst = y.row(t);
    for (std::size_t c = 0; c < kSpliceContext; ++c) {
      const std::size_t src = clamp_frame(static_cast<std::ptrdiff_t>(t + c) - static_cast<std::ptrdiff_t>(kSpliceHalf), frames);
      for (std::size_t i = 0; i < channels; ++i) dst[i * kSpliceContext + c] = x(src, i);
    }
  }
  return y;
}

Matrix pcmn_splice_forward(const Matrix& x, const PcmnSpliceParams& p) {
  p.validate();
  require_frames(x);
  require_channels(x, p.channels(), "pcmn_splice_forward");
  const auto& k = simd::active();
  const Matrix spliced = splice_frames(x);
  Matrix out(x.rows(), x.cols());
  for (std::size_t t = 0; t < x.rows(); ++t)
    for (std::size_t i = 0; i < x.cols(); ++i) out(t, i) = k.dot(p.weights.row(i), spliced.row(t)) + p.bias[i];
  return out;
}

PcmnSpliceGradients pcmn_splice_backward(const Matrix& x, const PcmnSpliceParams& p,
                                         const Matrix& upstream) {
  p.validate();
  require_frames(x);
  require_channels(x, p.channels(), "pcmn_splice_backward");
  if (!x.same_shape(upstream))
    throw Error(ErrorKind::ShapeMismatch, "input " + shape(x) + " vs upstream " + shape(upstream));

  const std::size_t frames = x.rows();
  const std::size_t channels = x.cols();
  const auto& k = simd::active();
  const Matrix spliced = splice_frames(x);
  PcmnSpliceGradients g{Matrix(channels, channels * kSpliceContext), std::vector<double>(channels, 0.0),
                        Matrix(frames, channels)};
  std::vector<double> d_spliced(channels * kSpliceContext);
  for (std::size_t t = 0; t < frames; ++t) {
    std::ranges::fill(d_spliced, 0.0);
    for (std::size_t i = 0; i < channels; ++i) {
      const double up = upstream(t, i);
      g.d_bias[i] += up;
      k.axpy(up, spliced.row(t), g.d_weights.row(i));
      k.axpy(up, p.weights.row(i), d_spliced);
    }
    for (std::size_t c = 0; c < kSpliceContext; ++c) {
      const std::size_t src = clamp_frame(static_cast<std::ptrdiff_t>(t + c) - static_cast<std::ptrdiff_t>(kSpliceHalf), frames);
      for (std::size_t i = 0; i < channels; ++i) g.d_input(src, i) += d_spliced[i * kSpliceContext + c];
    }
  }
  return g;
}

}  // namespace chanorm
