// AVX2 variants. Compiled for the generic x86-64 target; each function carries
// its own target attribute so the binary still runs on pre-AVX2 hardware as
// long as dispatch keeps these off the call path. No FMA: the elementwise
// kernels must round exactly like the scalar reference.

#include "simd_impl.hpp"

#if defined(CHANORM_HAVE_AVX2_TU)

#include <immintrin.h>

#define CHANORM_AVX2 __attribute__((target("avx2")))

namespace chanorm::simd::detail {

bool cpu_has_avx2() {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
}

CHANORM_AVX2 double dot_avx2(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  const double* pa = a.data();
  const double* pb = b.data();
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(pa + i), _mm256_loadu_pd(pb + i)));
    acc1 = _mm256_add_pd(acc1,
                         _mm256_mul_pd(_mm256_loadu_pd(pa + i + 4), _mm256_loadu_pd(pb + i + 4)));
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(pa + i), _mm256_loadu_pd(pb + i)));
  acc0 = _mm256_add_pd(acc0, acc1);
  const __m128d lo = _mm256_castpd256_pd128(acc0);
  const __m128d hi = _mm256_extractf128_pd(acc0, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  double acc = _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
  for (; i < n; ++i) acc += pa[i] * pb[i];
  return acc;
}

CHANORM_AVX2 void smooth_step_avx2(std::span<double> out, std::span<const double> prev,
                                   std::span<const double> in, double s) {
  const std::size_t n = out.size();
  const __m256d vs = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d p = _mm256_loadu_pd(prev.data() + i);
    const __m256d step = _mm256_mul_pd(vs, _mm256_sub_pd(_mm256_loadu_pd(in.data() + i), p));
    _mm256_storeu_pd(out.data() + i, _mm256_add_pd(p, step));
  }
  for (; i < n; ++i) out[i] = prev[i] + s * (in[i] - prev[i]);
}

CHANORM_AVX2 void axpy_avx2(double a, std::span<const double> x, std::span<double> y) {
  const std::size_t n = y.size();
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d ax = _mm256_mul_pd(va, _mm256_loadu_pd(x.data() + i));
    _mm256_storeu_pd(y.data() + i, _mm256_add_pd(_mm256_loadu_pd(y.data() + i), ax));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

CHANORM_AVX2 void abs2_avx2(std::span<const double> interleaved, std::span<double> out) {
  const std::size_t n = out.size();
  const double* src = interleaved.data();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    // v0 = re0 im0 re1 im1, v1 = re2 im2 re3 im3
    const __m256d v0 = _mm256_loadu_pd(src + 2 * k);
    const __m256d v1 = _mm256_loadu_pd(src + 2 * k + 4);
    const __m256d sq0 = _mm256_mul_pd(v0, v0);
    const __m256d sq1 = _mm256_mul_pd(v1, v1);
    // hadd gives (s0, s2, s1, s3); permute back to bin order.
    const __m256d h = _mm256_hadd_pd(sq0, sq1);
    _mm256_storeu_pd(out.data() + k, _mm256_permute4x64_pd(h, 0b11011000));
  }
  for (; k < n; ++k) {
    const double re = src[2 * k];
    const double im = src[2 * k + 1];
    out[k] = re * re + im * im;
  }
}

}  // namespace chanorm::simd::detail

#endif
