#pragma once

#include "chanorm/simd.hpp"

namespace chanorm::simd::detail {

double dot_scalar(std::span<const double> a, std::span<const double> b);
void smooth_step_scalar(std::span<double> out, std::span<const double> prev,
                        std::span<const double> in, double s);
void axpy_scalar(double a, std::span<const double> x, std::span<double> y);
void abs2_scalar(std::span<const double> interleaved, std::span<double> out);

#if defined(__x86_64__) || defined(_M_X64)
#define CHANORM_HAVE_AVX2_TU 1
double dot_avx2(std::span<const double> a, std::span<const double> b);
void smooth_step_avx2(std::span<double> out, std::span<const double> prev,
                      std::span<const double> in, double s);
void axpy_avx2(double a, std::span<const double> x, std::span<double> y);
void abs2_avx2(std::span<const double> interleaved, std::span<double> out);
bool cpu_has_avx2();
#endif

#if defined(__aarch64__)
#define CHANORM_HAVE_NEON_TU 1
double dot_neon(std::span<const double> a, std::span<const double> b);
void smooth_step_neon(std::span<double> out, std::span<const double> prev,
                      std::span<const double> in, double s);
void axpy_neon(double a, std::span<const double> x, std::span<double> y);
void abs2_neon(std::span<const double> interleaved, std::span<double> out);
#endif

}  // namespace chanorm::simd::detail
