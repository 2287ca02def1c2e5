#pragma once

// Data-parallel inner loops used by the front-end. Every kernel has a scalar
// reference implementation; vector variants are selected once at runtime from
// the CPU feature set.
//
// Elementwise kernels (smooth_step, axpy, abs2) produce bit-identical results
// on every level. dot is a reduction and only agrees with the scalar reference
// up to summation order.

#include <cstddef>
#include <span>
#include <string_view>

namespace chanorm::simd {

enum class Level { scalar, avx2, neon };

std::string_view to_string(Level level);

struct Kernels {
  Level level;
  /// sum_i a[i] * b[i]; spans must have equal length.
  double (*dot)(std::span<const double> a, std::span<const double> b);
  /// out[i] = prev[i] + s * (in[i] - prev[i]), i.e. (1 - s) prev + s in with
  /// constant inputs as exact fixed points.
  void (*smooth_step)(std::span<double> out, std::span<const double> prev,
                      std::span<const double> in, double s);
  /// y[i] += a * x[i]
  void (*axpy)(double a, std::span<const double> x, std::span<double> y);
  /// out[k] = re[k]^2 + im[k]^2 for interleaved (re, im) pairs.
  void (*abs2)(std::span<const double> interleaved, std::span<double> out);
};

const Kernels& scalar_kernels();

/// nullptr when the variant was not compiled in or the CPU lacks support.
const Kernels* avx2_kernels();
const Kernels* neon_kernels();

/// Best available level. Setting CHANORM_SIMD=scalar in the environment before
/// the first call pins the scalar reference.
const Kernels& active();

}  // namespace chanorm::simd
