#pragma once

// Front-end assembly: mel energies -> {log | PCEN} -> {none | CMN | PCMN}.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chanorm/dsp.hpp"
#include "chanorm/matrix.hpp"
#include "chanorm/pcen.hpp"
#include "chanorm/pcmn.hpp"

namespace chanorm {

inline constexpr double kLogFloor = 1e-10;

enum class Nonlinearity { log, pcen };
enum class PostNorm { none, cmn, pcmn_direct, pcmn_splice };

struct FrontendVariant {
  Nonlinearity nonlinearity = Nonlinearity::log;
  PostNorm post_norm = PostNorm::cmn;
  bool train_pcen = false;
  bool train_pcmn = false;
  bool no_agc = false;
  bool no_drc = false;

  /// One of log-cmn, pcen, log-pcmn, pcen-pcmn, apcen, log-apcmn, apcen-apcmn.
  static FrontendVariant from_name(std::string_view name);
  static const std::vector<std::string>& names();

  /// Canonical name plus ablation suffixes, e.g. "apcen+no-drc".
  std::string tag() const;
  bool trainable() const { return train_pcen || train_pcmn; }
  /// Throws Error(InvalidConfig) for combinations the pipeline cannot run.
  void validate() const;

  friend bool operator==(const FrontendVariant&, const FrontendVariant&) = default;
};

struct FrontendParams {
  std::optional<PcenParams> pcen;
  std::optional<PcmnDirectParams> pcmn_direct;
  std::optional<PcmnSpliceParams> pcmn_splice;
  CmnConfig cmn;
};

/// Working hand-crafted values broadcast to every channel: PCEN alpha 0.98,
/// delta 2.0, r 0.5; PCMN beta 1.0, alpha 0.5, mu0 0.0 (mapped into W, b for
/// the splice form).
FrontendParams kernel_init(const FrontendVariant& variant, std::size_t channels = 40);

/// Checks that every block the variant needs is present, valid, and sized for
/// `channels`. Ablation flags of the variant override the stored PCEN flags.
void check_params(const FrontendVariant& variant, const FrontendParams& params, std::size_t channels);

/// FNV-1a over the bit patterns of every stored parameter value.
std::uint64_t params_hash(const FrontendParams& params);

struct FeatureMatrix {
  Matrix values;
  std::string variant;
  std::uint64_t params_hash = 0;
};

Matrix log_compress(const Matrix& energies);

/// Intermediate values kept for the backward pass.
struct FrontendTrace {
  Matrix compressed;  // after log / PCEN
  Matrix smoothed;    // PCEN smoother state, empty for log
  Matrix features;
};

/// PCEN parameters as the variant will run them (ablation flags applied).
PcenParams effective_pcen(const FrontendVariant& variant, const FrontendParams& params);

FrontendTrace frontend_forward(const Matrix& energies, const FrontendVariant& variant,
                               const FrontendParams& params);

FeatureMatrix apply_frontend(const MelEnergies& energies, const FrontendVariant& variant,
                             const FrontendParams& params);

FeatureMatrix extract_features(const AudioBuffer& audio, const FrontendVariant& variant,
                               const FrontendParams& params, const FramingConfig& cfg = {});

}  // namespace chanorm
