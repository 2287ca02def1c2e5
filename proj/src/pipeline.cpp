#include <algorithm>
#include <bit>
#include <cmath>

#include "chanorm/error.hpp"
#include "chanorm/pipeline.hpp"

namespace chanorm {

namespace {

struct NamedVariant {
  const char* name;
  FrontendVariant variant;
};

const std::vector<NamedVariant>& variant_table() {
  static const std::vector<NamedVariant> table = {
      {"log-cmn", {Nonlinearity::log, PostNorm::cmn, false, false}},
      {"pcen", {Nonlinearity::pcen, PostNorm::none, false, false}},
      {"log-pcmn", {Nonlinearity::log, PostNorm::pcmn_direct, false, false}},
      {"pcen-pcmn", {Nonlinearity::pcen, PostNorm::pcmn_direct, false, false}},
      {"apcen", {Nonlinearity::pcen, PostNorm::none, true, false}},
      {"log-apcmn", {Nonlinearity::log, PostNorm::pcmn_splice, false, true}},
      {"apcen-apcmn", {Nonlinearity::pcen, PostNorm::pcmn_splice, true, true}},
  };
  return table;
}

class Fnv1a {
 public:
  void add(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      state_ ^= (v >> (8 * i)) & 0xffu;
      state_ *= 0x100000001b3ull;
    }
  }
  void add(double v) { add(std::bit_cast<std::uint64_t>(v)); }
  void add(std::span<const double> values) {
    add(static_cast<std::uint64_t>(values.size()));
    for (double v : values) add(v);
  }
  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ull;
};

}  // namespace

FrontendVariant FrontendVariant::from_name(std::string_view name) {
  for (const auto& entry : variant_table())
    if (name == entry.name) return entry.variant;
  std::string options;
  for (const auto& n : names()) options += (options.empty() ? "" : ", ") + n;
  throw Error(ErrorKind::InvalidConfig, "unknown frontend '" + std::string(name) + "' (valid: " + options + ")");
}

const std::vector<std::string>& FrontendVariant::names() {
  static const std::vector<std::string> out = [] {
    std::vector<std::string> v;
    for (const auto& entry : variant_table()) v.emplace_back(entry.name);
    return v;
  }();
  return out;
}

std::string FrontendVariant::tag() const {
  FrontendVariant base = *this;
  base.no_agc = base.no_drc = false;
  std::string out = "custom";
  for (const auto& entry : variant_table())
    if (entry.variant == base) out = entry.name;
  if (no_agc) out += "+no-agc";
  if (no_drc) out += "+no-drc";
  return out;
}

void FrontendVariant::validate() const {
  if ((no_agc || no_drc) && nonlinearity != Nonlinearity::pcen)
    throw Error(ErrorKind::InvalidConfig, "ablation flags require the PCEN nonlinearity");
  if (train_pcen && nonlinearity != Nonlinearity::pcen)
    throw Error(ErrorKind::InvalidConfig, "trainable PCEN requires the PCEN nonlinearity");
  if (train_pcmn && post_norm != PostNorm::pcmn_splice)
    throw Error(ErrorKind::InvalidConfig, "trainable PCMN requires the splice form");
  if (train_pcen && post_norm != PostNorm::none && post_norm != PostNorm::pcmn_splice)
    throw Error(ErrorKind::InvalidConfig,
                "trainable PCEN can only be followed by no post-normalizer or splice PCMN");
}

FrontendParams kernel_init(const FrontendVariant& variant, std::size_t channels) {
  variant.validate();
  FrontendParams p;
  if (variant.nonlinearity == Nonlinearity::pcen) {
    p.pcen = PcenParams::broadcast(channels, 0.98, 2.0, 0.5);
    p.pcen->agc_enabled = !variant.no_agc;
    p.pcen->drc_enabled = !variant.no_drc;
  }
  const auto direct = PcmnDirectParams::broadcast(channels, 1.0, 0.5, 0.0);
  if (variant.post_norm == PostNorm::pcmn_direct) p.pcmn_direct = direct;
  if (variant.post_norm == PostNorm::pcmn_splice) p.pcmn_splice = PcmnSpliceParams::from_direct(direct);
  return p;
}

void check_params(const FrontendVariant& variant, const FrontendParams& params, std::size_t channels) {
  variant.validate();
  auto check_channels = [channels](std::size_t have, const char* block) {
    if (have != channels)
      throw Error(ErrorKind::ShapeMismatch, std::string(block) + " parameters cover " + std::to_string(have) +
                                                " channels, features have " + std::to_string(channels));
  };
  if (variant.nonlinearity == Nonlinearity::pcen) {
    if (!params.pcen) throw Error(ErrorKind::SchemaMismatch, "missing pcen parameters for " + variant.tag());
    params.pcen->validate();
    check_channels(params.pcen->channels(), "pcen");
  }
  switch (variant.post_norm) {
    case PostNorm::none: break;
    case PostNorm::cmn: params.cmn.validate(); break;
    case PostNorm::pcmn_direct:
      if (!params.pcmn_direct)
        throw Error(ErrorKind::SchemaMismatch, "missing direct pcmn parameters for " + variant.tag());
      params.pcmn_direct->validate();
      params.cmn.validate();
      check_channels(params.pcmn_direct->channels(), "pcmn");
      break;
    case PostNorm::pcmn_splice:
      if (!params.pcmn_splice)
        throw Error(ErrorKind::SchemaMismatch, "missing splice pcmn parameters for " + variant.tag());
      params.pcmn_splice->validate();
      check_channels(params.pcmn_splice->channels(), "pcmn");
      break;
  }
}

std::uint64_t params_hash(const FrontendParams& params) {
  Fnv1a h;
  if (params.pcen) {
    h.add(std::uint64_t{1});
    h.add(params.pcen->alpha);
    h.add(params.pcen->delta);
    h.add(params.pcen->r);
    h.add(params.pcen->s);
    h.add(params.pcen->eps);
    h.add(static_cast<std::uint64_t>(params.pcen->agc_enabled) | (static_cast<std::uint64_t>(params.pcen->drc_enabled) << 1));
  }
  if (params.pcmn_direct) {
    h.add(std::uint64_t{2});
    h.add(params.pcmn_direct->beta);
    h.add(params.pcmn_direct->alpha);
    h.add(params.pcmn_direct->mu0);
  }
  if (params.pcmn_splice) {
    h.add(std::uint64_t{3});
    h.add(params.pcmn_splice->weights.data());
    h.add(params.pcmn_splice->bias);
  }
  h.add(static_cast<std::uint64_t>(params.cmn.mode));
  h.add(static_cast<std::uint64_t>(params.cmn.window_half));
  return h.value();
}

Matrix log_compress(const Matrix& energies) {
  Matrix out(energies.rows(), energies.cols());
  for (std::size_t n = 0; n < energies.size(); ++n) out.data()[n] = std::log(std::max(energies.data()[n], kLogFloor));
  return out;
}

PcenParams effective_pcen(const FrontendVariant& variant, const FrontendParams& params) {
  PcenParams p = *params.pcen;
  if (variant.no_agc) p.agc_enabled = false;
  if (variant.no_drc) p.drc_enabled = false;
  return p;
}

FrontendTrace frontend_forward(const Matrix& energies, const FrontendVariant& variant,
                               const FrontendParams& params) {
  check_params(variant, params, energies.cols());
  FrontendTrace trace;
  if (variant.nonlinearity == Nonlinearity::pcen) {
    auto res = pcen_forward(energies, effective_pcen(variant, params));
    trace.compressed = std::move(res.output);
    trace.smoothed = std::move(res.smoothed);
  } else {
    trace.compressed = log_compress(energies);
  }
  switch (variant.post_norm) {
    case PostNorm::none: trace.features = trace.compressed; break;
    case PostNorm::cmn: trace.features = cmn_apply(trace.compressed, params.cmn); break;
    case PostNorm::pcmn_direct:
      trace.features = pcmn_direct(trace.compressed, *params.pcmn_direct, params.cmn);
      break;
    case PostNorm::pcmn_splice:
      trace.features = pcmn_splice_forward(trace.compressed, *params.pcmn_splice);
      break;
  }
  return trace;
}

FeatureMatrix apply_frontend(const MelEnergies& energies, const FrontendVariant& variant,
                             const FrontendParams& params) {
  return {frontend_forward(energies.values, variant, params).features, variant.tag(), params_hash(params)};
}

FeatureMatrix extract_features(const AudioBuffer& audio, const FrontendVariant& variant,
                               const FrontendParams& params, const FramingConfig& cfg) {
  if (audio.samples.empty()) throw Error(ErrorKind::EmptyInput, "audio has no samples");
  check_params(variant, params, cfg.n_mels);
  return apply_frontend(compute_mel_energies(audio, cfg), variant, params);
}

}  // namespace chanorm
