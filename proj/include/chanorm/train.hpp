#pragma once

// Desk-scale fitting of trainable front-end parameters. The objective is a
// proxy: mean squared distance between features of a clean utterance and a
// degraded copy, with the clean path held constant. It exercises the gradient
// machinery and normalization behaviour, not speaker-verification accuracy.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "chanorm/dsp.hpp"
#include "chanorm/pcen.hpp"
#include "chanorm/pcmn.hpp"
#include "chanorm/pipeline.hpp"

namespace chanorm {

struct ProxyPair {
  AudioBuffer clean;
  AudioBuffer degraded;
};

enum class Objective { mse };

struct FitConfig {
  double learning_rate = 0.05;
  std::size_t steps = 500;
  std::uint64_t seed = 0;
  Objective objective = Objective::mse;

  void validate() const;
};

/// Gradients for the trainable blocks of a variant. Only the parameter fields
/// are filled; d_input of the nested structs is left empty.
struct ParamGradients {
  std::optional<PcenGradients> pcen;
  std::optional<PcmnSpliceGradients> pcmn;

  double norm() const;
};

ParamGradients frontend_backward(const Matrix& energies, const FrontendTrace& trace,
                                 const FrontendVariant& variant, const FrontendParams& params,
                                 const Matrix& upstream);

struct ProxyLoss {
  double loss = 0.0;
  Matrix upstream;  // d loss / d degraded features
};

ProxyLoss proxy_loss(const MelEnergies& clean, const MelEnergies& degraded, const FrontendVariant& variant,
                     const FrontendParams& params);
ProxyLoss proxy_loss(const ProxyPair& pair, const FrontendVariant& variant, const FrontendParams& params,
                     const FramingConfig& cfg = {});

/// p <- p - lr * g on the blocks that carry gradients, then PCEN box projection.
FrontendParams grad_step(const FrontendParams& params, const ParamGradients& grads, const FitConfig& cfg);

struct FitRecord {
  std::size_t step = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
};

std::string to_json_line(const FitRecord& record);

struct FitResult {
  FrontendParams params;
  std::vector<FitRecord> records;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

/// Projected gradient descent over the mean pair loss. `on_step` sees each
/// record as it is produced (loss and gradient before that step's update).
FitResult fit(const std::vector<ProxyPair>& pairs, const FrontendVariant& variant, FrontendParams params,
              const FitConfig& cfg, const FramingConfig& framing = {},
              const std::function<void(const FitRecord&)>& on_step = {});

/// Synthetic gain-mismatch task: amplitude-modulated coloured noise as the
/// clean signal, the degraded copy scaled by a per-pair gain drawn
/// log-uniformly from [0.2, 5].
std::vector<ProxyPair> make_gain_mismatch_task(std::uint64_t seed, std::size_t pairs = 20,
                                               double seconds = 1.0, int sample_rate = 16000);

struct GradcheckGroup {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_analytic = 0.0;
  double threshold = 0.0;

  bool passed() const { return max_rel_error < threshold; }
};

struct GradcheckReport {
  std::vector<GradcheckGroup> groups;

  bool passed() const;
  const GradcheckGroup* find(const std::string& name) const;
};

inline constexpr double kGradcheckStep = 1e-5;
inline constexpr double kGradcheckFloor = 1e-8;
inline constexpr double kPcenGradTolerance = 1e-4;
inline constexpr double kSpliceGradTolerance = 1e-6;

/// Analytic gradients against central finite differences on random energies
/// in [0.1, 10], random valid parameters and a random upstream.
GradcheckReport gradcheck(const FrontendVariant& variant, std::uint64_t seed, std::size_t frames,
                          std::size_t channels);

}  // namespace chanorm
