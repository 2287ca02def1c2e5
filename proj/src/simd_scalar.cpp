#include "simd_impl.hpp"

namespace chanorm::simd::detail {

double dot_scalar(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

void smooth_step_scalar(std::span<double> out, std::span<const double> prev,
                        std::span<const double> in, double s) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = prev[i] + s * (in[i] - prev[i]);
}

void axpy_scalar(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

void abs2_scalar(std::span<const double> interleaved, std::span<double> out) {
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double re = interleaved[2 * k];
    const double im = interleaved[2 * k + 1];
    out[k] = re * re + im * im;
  }
}

}  // namespace chanorm::simd::detail
