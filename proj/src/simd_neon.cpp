#include "simd_impl.hpp"

#if defined(CHANORM_HAVE_NEON_TU)

#include <arm_neon.h>

namespace chanorm::simd::detail {

double dot_neon(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vaddq_f64(acc0, vmulq_f64(vld1q_f64(a.data() + i), vld1q_f64(b.data() + i)));
    acc1 = vaddq_f64(acc1, vmulq_f64(vld1q_f64(a.data() + i + 2), vld1q_f64(b.data() + i + 2)));
  }
  double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void smooth_step_neon(std::span<double> out, std::span<const double> prev,
                      std::span<const double> in, double s) {
  const std::size_t n = out.size();
  const float64x2_t vs = vdupq_n_f64(s);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t p = vld1q_f64(prev.data() + i);
    const float64x2_t step = vmulq_f64(vs, vsubq_f64(vld1q_f64(in.data() + i), p));
    vst1q_f64(out.data() + i, vaddq_f64(p, step));
  }
  for (; i < n; ++i) out[i] = prev[i] + s * (in[i] - prev[i]);
}

void axpy_neon(double a, std::span<const double> x, std::span<double> y) {
  const std::size_t n = y.size();
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(y.data() + i, vaddq_f64(vld1q_f64(y.data() + i), vmulq_f64(va, vld1q_f64(x.data() + i))));
  for (; i < n; ++i) y[i] += a * x[i];
}

void abs2_neon(std::span<const double> interleaved, std::span<double> out) {
  const std::size_t n = out.size();
  std::size_t k = 0;
  for (; k + 2 <= n; k += 2) {
    const float64x2x2_t v = vld2q_f64(interleaved.data() + 2 * k);
    vst1q_f64(out.data() + k, vaddq_f64(vmulq_f64(v.val[0], v.val[0]), vmulq_f64(v.val[1], v.val[1])));
  }
  for (; k < n; ++k) {
    const double re = interleaved[2 * k];
    const double im = interleaved[2 * k + 1];
    out[k] = re * re + im * im;
  }
}

}  // namespace chanorm::simd::detail

#endif
