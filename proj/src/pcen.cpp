#include <algorithm>
#include <cmath>
#include <string>

#include "chanorm/error.hpp"
#include "chanorm/pcen.hpp"
#include "chanorm/simd.hpp"

namespace chanorm {

namespace {

void check_vector(const std::vector<double>& v, const char* name, std::size_t channels) {
  if (v.size() != channels)
    throw Error(ErrorKind::ShapeMismatch, std::string("pcen.") + name + " has " +
                                              std::to_string(v.size()) + " entries, expected " +
                                              std::to_string(channels));
}

[[noreturn]] void bad_entry(const char* name, std::size_t f, double v, const char* bound) {
  throw Error(ErrorKind::InvalidParameter, std::string("pcen.") + name + "[" + std::to_string(f) +
                                               "] = " + std::to_string(v) + " violates " + bound);
}

void check_inputs(const Matrix& energies, const PcenParams& p) {
  p.validate();
  if (energies.cols() != p.channels())
    throw Error(ErrorKind::ShapeMismatch, "energies have " + std::to_string(energies.cols()) +
                                              " channels, parameters have " +
                                              std::to_string(p.channels()));
}

}  // namespace

PcenParams PcenParams::broadcast(std::size_t channels, double alpha, double delta, double r) {
  PcenParams p;
  p.alpha.assign(channels, alpha);
  p.delta.assign(channels, delta);
  p.r.assign(channels, r);
  return p;
}

void PcenParams::validate() const {
  const std::size_t n = alpha.size();
  check_vector(delta, "delta", n);
  check_vector(r, "r", n);
  for (std::size_t f = 0; f < n; ++f) {
    if (!(alpha[f] > 0.0 && alpha[f] <= 1.0)) bad_entry("alpha", f, alpha[f], "alpha in (0, 1]");
    if (!(delta[f] > 0.0 && std::isfinite(delta[f])))
      bad_entry("delta", f, delta[f], "delta > 0");
    if (!(r[f] > 0.0 && r[f] <= 1.0)) bad_entry("r", f, r[f], "r in (0, 1]");
  }
  if (!(s > 0.0 && s <= 1.0))
    throw Error(ErrorKind::InvalidSmoothing, "pcen.s = " + std::to_string(s) + " violates s in (0, 1]");
  if (!(eps > 0.0 && std::isfinite(eps)))
    throw Error(ErrorKind::InvalidParameter, "pcen.eps = " + std::to_string(eps) + " violates eps > 0");
}

void project_pcen(PcenParams& p) {
  for (double& a : p.alpha) a = std::clamp(a, kPcenMinExponent, 1.0);
  for (double& r : p.r) r = std::clamp(r, kPcenMinExponent, 1.0);
  for (double& d : p.delta) d = std::max(d, kPcenMinDelta);
}

Matrix smooth_energies(const Matrix& energies, double s) {
  if (!(s > 0.0 && s <= 1.0))
    throw Error(ErrorKind::InvalidSmoothing, "s = " + std::to_string(s) + " violates s in (0, 1]");
  Matrix m(energies.rows(), energies.cols());
  if (energies.rows() == 0) return m;
  std::ranges::copy(energies.row(0), m.row(0).begin());
  const auto& k = simd::active();
  for (std::size_t t = 1; t < energies.rows(); ++t) k.smooth_step(m.row(t), m.row(t - 1), energies.row(t), s);
  return m;
}

PcenResult pcen_forward(const Matrix& energies, const PcenParams& p) {
  check_inputs(energies, p);
  PcenResult res{Matrix(energies.rows(), energies.cols()), smooth_energies(energies, p.s)};
  const std::size_t channels = energies.cols();
  for (std::size_t t = 0; t < energies.rows(); ++t) {
    const auto e = energies.row(t);
    const auto m = res.smoothed.row(t);
    auto y = res.output.row(t);
    for (std::size_t f = 0; f < channels; ++f) {
      // The AGC divisor is evaluated in the log domain; multiplying by E
      // afterwards keeps E = 0 exact and needs no log of the energy itself.
      double g = e[f];
      if (p.agc_enabled) g = e[f] * std::exp(-p.alpha[f] * std::log(m[f] + p.eps));
      if (p.drc_enabled) g = std::pow(g + p.delta[f], p.r[f]) - std::pow(p.delta[f], p.r[f]);
      y[f] = g;
    }
  }
  return res;
}

PcenGradients pcen_backward(const Matrix& energies, const Matrix& smoothed, const PcenParams& p,
                            const Matrix& upstream) {
  check_inputs(energies, p);
  if (!energies.same_shape(smoothed) || !energies.same_shape(upstream))
    throw Error(ErrorKind::ShapeMismatch,
                "energies " + std::to_string(energies.rows()) + "x" + std::to_string(energies.cols()) +
                    ", smoothed " + std::to_string(smoothed.rows()) + "x" +
                    std::to_string(smoothed.cols()) + ", upstream " +
                    std::to_string(upstream.rows()) + "x" + std::to_string(upstream.cols()));

  const std::size_t frames = energies.rows();
  const std::size_t channels = energies.cols();
  PcenGradients grads{std::vector<double>(channels, 0.0), std::vector<double>(channels, 0.0),
                      std::vector<double>(channels, 0.0), Matrix(frames, channels)};
  // Adjoint of M accumulated from the AGC term of each frame.
  Matrix adj_m(frames, channels);

  for (std::size_t t = 0; t < frames; ++t) {
    const auto e = energies.row(t);
    const auto m = smoothed.row(t);
    const auto up = upstream.row(t);
    auto d_in = grads.d_input.row(t);
    auto d_m = adj_m.row(t);
    for (std::size_t f = 0; f < channels; ++f) {
      double gain = 1.0;  // (M + eps)^-alpha
      double log_m = 0.0;
      double g = e[f];
      if (p.agc_enabled) {
        log_m = std::log(m[f] + p.eps);
        gain = std::exp(-p.alpha[f] * log_m);
        g = e[f] * gain;
      }
      double d_g = up[f];
      if (p.drc_enabled) {
        const double base = g + p.delta[f];
        const double pow_base = std::pow(base, p.r[f]);
        const double pow_delta = std::pow(p.delta[f], p.r[f]);
        d_g = up[f] * p.r[f] * pow_base / base;
        grads.d_delta[f] += up[f] * p.r[f] * (pow_base / base - pow_delta / p.delta[f]);
        grads.d_r[f] += up[f] * (pow_base * std::log(base) - pow_delta * std::log(p.delta[f]));
      }
      if (p.agc_enabled) {
        d_in[f] = d_g * gain;
        d_m[f] = -d_g * p.alpha[f] * g / (m[f] + p.eps);
        grads.d_alpha[f] -= d_g * g * log_m;
      } else {
        d_in[f] = d_g;
      }
    }
  }

  if (p.agc_enabled && frames > 0) {
    // M[t] = (1-s) M[t-1] + s E[t] for t >= 1 and M[0] = E[0].
    const auto& k = simd::active();
    const double keep = 1.0 - p.s;
    for (std::size_t t = frames - 1; t > 0; --t) k.axpy(keep, adj_m.row(t), adj_m.row(t - 1));
    for (std::size_t t = 1; t < frames; ++t) k.axpy(p.s, adj_m.row(t), grads.d_input.row(t));
    k.axpy(1.0, adj_m.row(0), grads.d_input.row(0));
  }
  return grads;
}

}  // namespace chanorm
