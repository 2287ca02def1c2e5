#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <json.hpp>

#include "chanorm/error.hpp"
#include "chanorm/train.hpp"

namespace chanorm {

namespace {

double sum_squares(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc;
}

void add_scaled(std::vector<double>& dst, const std::vector<double>& src, double scale) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

void add_scaled(Matrix& dst, const Matrix& src, double scale) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += scale * src.data()[i];
}

/// Accumulates `src * scale` into `dst`, allocating on first use.
void accumulate(ParamGradients& dst, const ParamGradients& src, double scale) {
  if (src.pcen) {
    if (!dst.pcen) {
      const std::size_t n = src.pcen->d_alpha.size();
      dst.pcen = PcenGradients{std::vector<double>(n), std::vector<double>(n), std::vector<double>(n), {}};
    }
    add_scaled(dst.pcen->d_alpha, src.pcen->d_alpha, scale);
    add_scaled(dst.pcen->d_delta, src.pcen->d_delta, scale);
    add_scaled(dst.pcen->d_r, src.pcen->d_r, scale);
  }
  if (src.pcmn) {
    if (!dst.pcmn)
      dst.pcmn = PcmnSpliceGradients{Matrix(src.pcmn->d_weights.rows(), src.pcmn->d_weights.cols()),
                                     std::vector<double>(src.pcmn->d_bias.size()), {}};
    add_scaled(dst.pcmn->d_weights, src.pcmn->d_weights, scale);
    add_scaled(dst.pcmn->d_bias, src.pcmn->d_bias, scale);
  }
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradcheckFloor});
  return std::abs(analytic - numeric) / denom;
}

/// sum(upstream * (plus - minus)) / 2h, differenced entry by entry so that
/// outputs a perturbation does not reach contribute exactly zero.
double central_difference(const Matrix& upstream, const Matrix& plus, const Matrix& minus) {
  double acc = 0.0;
  for (std::size_t n = 0; n < upstream.size(); ++n) acc += upstream.data()[n] * (plus.data()[n] - minus.data()[n]);
  return acc / (2.0 * kGradcheckStep);
}

/// Splice outputs as unevaluated sums hi + lo. Differencing a linear map in
/// plain doubles leaves only rounding noise, and that noise swamps near-zero
/// gradient entries; the compensated form keeps the difference exact enough.
struct SplitMatrix {
  Matrix hi;
  Matrix lo;
};

SplitMatrix splice_forward_compensated(const Matrix& x, const PcmnSpliceParams& p) {
  const std::size_t frames = x.rows();
  const std::size_t channels = x.cols();
  SplitMatrix out{Matrix(frames, channels), Matrix(frames, channels)};
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t i = 0; i < channels; ++i) {
      double sum = p.bias[i];
      double err = 0.0;
      for (std::size_t j = 0; j < channels; ++j)
        for (std::size_t c = 0; c < kSpliceContext; ++c) {
          const auto src = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(t + c) - static_cast<std::ptrdiff_t>(kSpliceHalf), 0,
                                                       static_cast<std::ptrdiff_t>(frames) - 1);
          const double a = p.weights(i, j * kSpliceContext + c);
          const double b = x(static_cast<std::size_t>(src), j);
          const double prod = a * b;
          const double prod_err = std::fma(a, b, -prod);
          const double next = sum + prod;
          const double bv = next - sum;
          err += ((sum - (next - bv)) + (prod - bv)) + prod_err;
          sum = next;
        }
      out.hi(t, i) = sum;
      out.lo(t, i) = err;
    }
  return out;
}

double central_difference(const Matrix& upstream, const SplitMatrix& plus, const SplitMatrix& minus) {
  double acc = 0.0;
  for (std::size_t n = 0; n < upstream.size(); ++n)
    acc += upstream.data()[n] * ((plus.hi.data()[n] - minus.hi.data()[n]) + (plus.lo.data()[n] - minus.lo.data()[n]));
  return acc / (2.0 * kGradcheckStep);
}

struct GroupTracker {
  GradcheckGroup group;
  void add(double analytic, double numeric) {
    group.max_rel_error = std::max(group.max_rel_error, relative_error(analytic, numeric));
    group.max_abs_analytic = std::max(group.max_abs_analytic, std::abs(analytic));
  }
};

Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

PcenParams random_pcen(std::mt19937_64& rng, std::size_t channels, const FrontendVariant& variant) {
  // Exponents stay at least one FD step below 1 so perturbed values remain valid.
  std::uniform_real_distribution<double> exponent(0.05, 0.99);
  std::uniform_real_distribution<double> bias(0.1, 5.0);
  PcenParams p;
  for (std::size_t f = 0; f < channels; ++f) {
    p.alpha.push_back(exponent(rng));
    p.delta.push_back(bias(rng));
    p.r.push_back(exponent(rng));
  }
  p.agc_enabled = !variant.no_agc;
  p.drc_enabled = !variant.no_drc;
  return p;
}

PcmnSpliceParams random_splice(std::mt19937_64& rng, std::size_t channels) {
  PcmnSpliceParams p = PcmnSpliceParams::zeros(channels);
  std::normal_distribution<double> dist(0.0, 0.2);
  for (double& w : p.weights.data()) w = dist(rng);
  for (double& b : p.bias) b = dist(rng);
  return p;
}

template <class Forward>
void check_values(GroupTracker& tracker, const Matrix& upstream, std::span<double> values,
                  std::span<const double> analytic, Forward&& forward) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + kGradcheckStep;
    const auto plus = forward();
    values[i] = saved - kGradcheckStep;
    const auto minus = forward();
    values[i] = saved;
    tracker.add(analytic[i], central_difference(upstream, plus, minus));
  }
}

GroupTracker tracker(std::string name, double threshold) {
  GroupTracker t;
  t.group.name = std::move(name);
  t.group.threshold = threshold;
  return t;
}

}  // namespace

void FitConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::InvalidConfig, "learning_rate must be > 0");
  if (steps < 1) throw Error(ErrorKind::InvalidConfig, "steps must be >= 1");
}

double ParamGradients::norm() const {
  double acc = 0.0;
  if (pcen) acc += sum_squares(pcen->d_alpha) + sum_squares(pcen->d_delta) + sum_squares(pcen->d_r);
  if (pcmn) acc += sum_squares(pcmn->d_weights.data()) + sum_squares(pcmn->d_bias);
  return std::sqrt(acc);
}

ParamGradients frontend_backward(const Matrix& energies, const FrontendTrace& trace,
                                 const FrontendVariant& variant, const FrontendParams& params,
                                 const Matrix& upstream) {
  variant.validate();
  if (!trace.features.same_shape(upstream))
    throw Error(ErrorKind::ShapeMismatch, "upstream does not match the feature shape");
  ParamGradients out;
  Matrix upstream_compressed;
  if (variant.post_norm == PostNorm::pcmn_splice) {
    auto g = pcmn_splice_backward(trace.compressed, *params.pcmn_splice, upstream);
    upstream_compressed = std::move(g.d_input);
    if (variant.train_pcmn) {
      g.d_input = Matrix();
      out.pcmn = std::move(g);
    }
  } else {
    upstream_compressed = upstream;
  }
  if (variant.train_pcen) {
    auto g = pcen_backward(energies, trace.smoothed, effective_pcen(variant, params), upstream_compressed);
    g.d_input = Matrix();
    out.pcen = std::move(g);
  }
  return out;
}

ProxyLoss proxy_loss(const MelEnergies& clean, const MelEnergies& degraded, const FrontendVariant& variant,
                     const FrontendParams& params) {
  const Matrix target = frontend_forward(clean.values, variant, params).features;
  const Matrix actual = frontend_forward(degraded.values, variant, params).features;
  if (!target.same_shape(actual))
    throw Error(ErrorKind::ShapeMismatch, "clean and degraded features differ in shape");
  ProxyLoss out{0.0, Matrix(actual.rows(), actual.cols())};
  const double count = static_cast<double>(actual.size());
  for (std::size_t n = 0; n < actual.size(); ++n) {
    const double diff = actual.data()[n] - target.data()[n];
    out.loss += diff * diff;
    out.upstream.data()[n] = 2.0 * diff / count;
  }
  out.loss /= count;
  return out;
}

ProxyLoss proxy_loss(const ProxyPair& pair, const FrontendVariant& variant, const FrontendParams& params,
                     const FramingConfig& cfg) {
  if (pair.clean.samples.size() != pair.degraded.samples.size() ||
      pair.clean.sample_rate != pair.degraded.sample_rate)
    throw Error(ErrorKind::ShapeMismatch, "clean and degraded audio differ in length or rate");
  return proxy_loss(compute_mel_energies(pair.clean, cfg), compute_mel_energies(pair.degraded, cfg), variant, params);
}

FrontendParams grad_step(const FrontendParams& params, const ParamGradients& grads, const FitConfig& cfg) {
  cfg.validate();
  FrontendParams out = params;
  if (grads.pcen) {
    if (!out.pcen) throw Error(ErrorKind::ShapeMismatch, "PCEN gradients without PCEN parameters");
    auto& p = *out.pcen;
    if (grads.pcen->d_alpha.size() != p.channels() || grads.pcen->d_delta.size() != p.channels() ||
        grads.pcen->d_r.size() != p.channels())
      throw Error(ErrorKind::ShapeMismatch, "PCEN gradient length does not match parameters");
    add_scaled(p.alpha, grads.pcen->d_alpha, -cfg.learning_rate);
    add_scaled(p.delta, grads.pcen->d_delta, -cfg.learning_rate);
    add_scaled(p.r, grads.pcen->d_r, -cfg.learning_rate);
    project_pcen(p);
  }
  if (grads.pcmn) {
    if (!out.pcmn_splice) throw Error(ErrorKind::ShapeMismatch, "PCMN gradients without splice parameters");
    auto& p = *out.pcmn_splice;
    if (!p.weights.same_shape(grads.pcmn->d_weights) || p.bias.size() != grads.pcmn->d_bias.size())
      throw Error(ErrorKind::ShapeMismatch, "PCMN gradient shape does not match parameters");
    add_scaled(p.weights, grads.pcmn->d_weights, -cfg.learning_rate);
    add_scaled(p.bias, grads.pcmn->d_bias, -cfg.learning_rate);
  }
  return out;
}

std::string to_json_line(const FitRecord& record) {
  nlohmann::ordered_json j;
  j["step"] = record.step;
  j["loss"] = record.loss;
  j["grad_norm"] = record.grad_norm;
  return j.dump();
}

FitResult fit(const std::vector<ProxyPair>& pairs, const FrontendVariant& variant, FrontendParams params,
              const FitConfig& cfg, const FramingConfig& framing,
              const std::function<void(const FitRecord&)>& on_step) {
  cfg.validate();
  variant.validate();
  if (!variant.trainable()) throw Error(ErrorKind::InvalidConfig, variant.tag() + " has no trainable parameters");
  if (pairs.empty()) throw Error(ErrorKind::EmptyInput, "no training pairs");

  struct Prepared {
    MelEnergies clean;
    MelEnergies degraded;
  };
  std::vector<Prepared> prepared;
  prepared.reserve(pairs.size());
  for (const auto& pair : pairs) {
    if (pair.clean.samples.size() != pair.degraded.samples.size())
      throw Error(ErrorKind::ShapeMismatch, "clean and degraded audio differ in length");
    prepared.push_back({compute_mel_energies(pair.clean, framing), compute_mel_energies(pair.degraded, framing)});
  }

  const double weight = 1.0 / static_cast<double>(prepared.size());
  auto evaluate = [&](const FrontendParams& p, ParamGradients* grads) {
    double loss = 0.0;
    for (const auto& item : prepared) {
      const ProxyLoss pl = proxy_loss(item.clean, item.degraded, variant, p);
      loss += weight * pl.loss;
      if (grads) {
        const FrontendTrace trace = frontend_forward(item.degraded.values, variant, p);
        accumulate(*grads, frontend_backward(item.degraded.values, trace, variant, p, pl.upstream), weight);
      }
    }
    return loss;
  };

  FitResult result;
  result.records.reserve(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    ParamGradients grads;
    const double loss = evaluate(params, &grads);
    FitRecord record{step, loss, grads.norm()};
    if (step == 0) result.initial_loss = loss;
    result.records.push_back(record);
    if (on_step) on_step(record);
    params = grad_step(params, grads, cfg);
  }
  result.final_loss = evaluate(params, nullptr);
  result.params = std::move(params);
  return result;
}

std::vector<ProxyPair> make_gain_mismatch_task(std::uint64_t seed, std::size_t pairs, double seconds,
                                               int sample_rate) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto n = static_cast<std::size_t>(std::llround(seconds * sample_rate));
  std::vector<ProxyPair> out;
  out.reserve(pairs);
  for (std::size_t i = 0; i < pairs; ++i) {
    // Coloured noise through a one-pole low-pass, gated by a syllable-rate
    // envelope so energies vary over time like speech.
    const double pole = 0.6 + 0.35 * unit(rng);
    const double rate_hz = 3.0 + 3.0 * unit(rng);
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    std::vector<double> x(n);
    double state = 0.0;
    double peak = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      state = pole * state + (1.0 - pole) * noise(rng);
      const double env = std::pow(0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * rate_hz * static_cast<double>(k) / sample_rate + phase), 2.0);
      x[k] = state * (0.05 + env);
      peak = std::max(peak, std::abs(x[k]));
    }
    const double norm = peak > 0.0 ? 0.1 / peak : 0.0;
    for (double& v : x) v *= norm;
    const double gain = std::exp(std::log(0.2) + (std::log(5.0) - std::log(0.2)) * unit(rng));
    ProxyPair pair;
    pair.clean = AudioBuffer{x, sample_rate};
    pair.degraded = AudioBuffer{std::move(x), sample_rate};
    for (double& v : pair.degraded.samples) v *= gain;
    out.push_back(std::move(pair));
  }
  return out;
}

bool GradcheckReport::passed() const {
  return std::ranges::all_of(groups, [](const GradcheckGroup& g) { return g.passed(); });
}

const GradcheckGroup* GradcheckReport::find(const std::string& name) const {
  for (const auto& g : groups)
    if (g.name == name) return &g;
  return nullptr;
}

GradcheckReport gradcheck(const FrontendVariant& variant, std::uint64_t seed, std::size_t frames,
                          std::size_t channels) {
  variant.validate();
  if (!variant.trainable()) throw Error(ErrorKind::InvalidConfig, variant.tag() + " has no trainable parameters");
  if (frames == 0 || channels == 0) throw Error(ErrorKind::EmptyInput, "gradcheck needs frames, channels >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto random_upstream = [&] {
    Matrix up(frames, channels);
    for (double& v : up.data()) v = gauss(rng);
    return up;
  };
  GradcheckReport report;

  if (variant.train_pcen) {
    Matrix energies = random_matrix(rng, frames, channels, 0.1, 10.0);
    PcenParams p = random_pcen(rng, channels, variant);
    const Matrix up = random_upstream();
    const auto fwd = pcen_forward(energies, p);
    const auto g = pcen_backward(energies, fwd.smoothed, p, up);
    auto forward = [&] { return pcen_forward(energies, p).output; };

    auto ta = tracker("pcen.alpha", kPcenGradTolerance);
    auto td = tracker("pcen.delta", kPcenGradTolerance);
    auto tr = tracker("pcen.r", kPcenGradTolerance);
    auto ti = tracker("pcen.input", kPcenGradTolerance);
    check_values(ta, up, p.alpha, g.d_alpha, forward);
    check_values(td, up, p.delta, g.d_delta, forward);
    check_values(tr, up, p.r, g.d_r, forward);
    check_values(ti, up, energies.data(), g.d_input.data(), forward);
    for (auto* t : {&ta, &td, &tr, &ti}) report.groups.push_back(t->group);
  }

  if (variant.post_norm == PostNorm::pcmn_splice) {
    Matrix x(frames, channels);
    for (double& v : x.data()) v = gauss(rng);
    PcmnSpliceParams p = random_splice(rng, channels);
    const Matrix up = random_upstream();
    const auto g = pcmn_splice_backward(x, p, up);
    auto forward = [&] { return splice_forward_compensated(x, p); };

    auto tw = tracker("pcmn.weights", kSpliceGradTolerance);
    auto tb = tracker("pcmn.bias", kSpliceGradTolerance);
    auto ti = tracker("pcmn.input", kSpliceGradTolerance);
    check_values(tw, up, p.weights.data(), g.d_weights.data(), forward);
    check_values(tb, up, p.bias, g.d_bias, forward);
    check_values(ti, up, x.data(), g.d_input.data(), forward);
    for (auto* t : {&tw, &tb, &ti}) report.groups.push_back(t->group);
  }

  if (variant.train_pcen && variant.post_norm == PostNorm::pcmn_splice) {
    // End-to-end through PCEN and the splice projection.
    Matrix energies = random_matrix(rng, frames, channels, 0.1, 10.0);
    FrontendParams params;
    params.pcen = random_pcen(rng, channels, variant);
    params.pcmn_splice = random_splice(rng, channels);
    const Matrix up = random_upstream();
    const auto trace = frontend_forward(energies, variant, params);
    const auto g = frontend_backward(energies, trace, variant, params, up);
    auto forward = [&] { return frontend_forward(energies, variant, params).features; };

    auto ta = tracker("chain.pcen.alpha", kPcenGradTolerance);
    auto td = tracker("chain.pcen.delta", kPcenGradTolerance);
    auto tr = tracker("chain.pcen.r", kPcenGradTolerance);
    auto tw = tracker("chain.pcmn.weights", kPcenGradTolerance);
    check_values(ta, up, params.pcen->alpha, g.pcen->d_alpha, forward);
    check_values(td, up, params.pcen->delta, g.pcen->d_delta, forward);
    check_values(tr, up, params.pcen->r, g.pcen->d_r, forward);
    check_values(tw, up, params.pcmn_splice->weights.data(), g.pcmn->d_weights.data(), forward);
    for (auto* t : {&ta, &td, &tr, &tw}) report.groups.push_back(t->group);
  }
  return report;
}

}  // namespace chanorm
