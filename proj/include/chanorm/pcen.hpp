#pragma once

// Per-channel energy normalization:
//
//   M[t,f] = (1 - s) M[t-1,f] + s E[t,f],   M[0,f] = E[0,f]
//   G[t,f] = E[t,f] / (M[t,f] + eps)^alpha[f]          (AGC)
//   y[t,f] = (G[t,f] + delta[f])^r[f] - delta[f]^r[f]   (DRC)
//
// alpha, delta and r are per-channel and trainable; s and eps are fixed.
// Either stage can be switched off for ablations, in which case it passes its
// input through unchanged.

#include <cstddef>
#include <vector>

#include "chanorm/dsp.hpp"
#include "chanorm/matrix.hpp"

namespace chanorm {

struct PcenParams {
  std::vector<double> alpha;
  std::vector<double> delta;
  std::vector<double> r;
  double s = 1.0 / 40.0;
  double eps = 1e-6;
  bool agc_enabled = true;
  bool drc_enabled = true;

  std::size_t channels() const { return alpha.size(); }

  /// Constant-per-channel parameters.
  static PcenParams broadcast(std::size_t channels, double alpha, double delta, double r);

  /// Throws Error(InvalidParameter) or Error(InvalidSmoothing) naming the first
  /// violated bound.
  void validate() const;
};

/// Lower bounds used by the training projection.
inline constexpr double kPcenMinExponent = 1e-3;
inline constexpr double kPcenMinDelta = 1e-3;

/// Clamp alpha and r to [1e-3, 1] and delta to [1e-3, inf).
void project_pcen(PcenParams& p);

/// First-order IIR smoother along time, per channel.
Matrix smooth_energies(const Matrix& energies, double s);

struct PcenResult {
  Matrix output;
  Matrix smoothed;
};

PcenResult pcen_forward(const Matrix& energies, const PcenParams& p);

struct PcenGradients {
  std::vector<double> d_alpha;
  std::vector<double> d_delta;
  std::vector<double> d_r;
  Matrix d_input;
};

/// Reverse-mode gradients of sum(upstream * y) through the whole forward graph,
/// including the smoother recursion. `smoothed` must come from pcen_forward on
/// the same energies and parameters.
PcenGradients pcen_backward(const Matrix& energies, const Matrix& smoothed, const PcenParams& p,
                            const Matrix& upstream);

}  // namespace chanorm
