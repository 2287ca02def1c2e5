#pragma once

// Mean normalizers applied per channel after the compression stage.
//
//   CMN:          x_hat = x - mu
//   PCMN direct:  x_hat = beta * x - (alpha * mu + mu0)
//   PCMN splice:  x_hat = W * Y_t + b,  Y_t = [x_{t-10}, ..., x_t, ..., x_{t+10}]
//
// Splice vectors are channel-major: column i * 21 + c of W reads channel i at
// context offset c - 10. Frames beyond either end are replicated edge frames.

#include <cstddef>
#include <vector>

#include "chanorm/matrix.hpp"

namespace chanorm {

enum class CmnMode { full_utterance, sliding };

struct CmnConfig {
  CmnMode mode = CmnMode::full_utterance;
  /// Sliding mode averages the trailing N + 1 frames, N = 2 * window_half.
  std::size_t window_half = 150;

  std::size_t window() const { return 2 * window_half; }
  void validate() const;
};

/// Per-frame channel means mu_t under the configured estimator.
Matrix channel_means(const Matrix& x, const CmnConfig& cfg);

Matrix cmn_apply(const Matrix& x, const CmnConfig& cfg);

struct PcmnDirectParams {
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> mu0;

  std::size_t channels() const { return beta.size(); }
  static PcmnDirectParams broadcast(std::size_t channels, double beta, double alpha, double mu0);
  void validate() const;
};

Matrix pcmn_direct(const Matrix& x, const PcmnDirectParams& p, const CmnConfig& cfg);

inline constexpr std::size_t kSpliceContext = 21;
inline constexpr std::size_t kSpliceHalf = kSpliceContext / 2;

struct PcmnSpliceParams {
  Matrix weights;  // F x (F * 21)
  std::vector<double> bias;

  std::size_t channels() const { return bias.size(); }
  static PcmnSpliceParams zeros(std::size_t channels);
  /// Block-diagonal projection reproducing the direct form with a centered
  /// 21-frame mean: center weight beta - alpha/21, other taps -alpha/21,
  /// bias -mu0.
  static PcmnSpliceParams from_direct(const PcmnDirectParams& direct);
  /// The 21 taps channel i applies to its own context.
  std::vector<double> diagonal_block(std::size_t channel) const;
  void validate() const;
};

/// Y_t for every frame, as a T x (F * 21) matrix.
Matrix splice_frames(const Matrix& x);

Matrix pcmn_splice_forward(const Matrix& x, const PcmnSpliceParams& p);

struct PcmnSpliceGradients {
  Matrix d_weights;
  std::vector<double> d_bias;
  Matrix d_input;
};

PcmnSpliceGradients pcmn_splice_backward(const Matrix& x, const PcmnSpliceParams& p,
                                         const Matrix& upstream);

}  // namespace chanorm
