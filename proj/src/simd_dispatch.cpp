#include <cstdlib>
#include <string_view>

#include "simd_impl.hpp"

namespace chanorm::simd {

std::string_view to_string(Level level) {
  switch (level) {
    case Level::scalar: return "scalar";
    case Level::avx2: return "avx2";
    case Level::neon: return "neon";
  }
  return "unknown";
}

const Kernels& scalar_kernels() {
  static const Kernels k{Level::scalar, detail::dot_scalar, detail::smooth_step_scalar,
                         detail::axpy_scalar, detail::abs2_scalar};
  return k;
}

const Kernels* avx2_kernels() {
#if defined(CHANORM_HAVE_AVX2_TU)
  static const Kernels k{Level::avx2, detail::dot_avx2, detail::smooth_step_avx2,
                         detail::axpy_avx2, detail::abs2_avx2};
  static const bool supported = detail::cpu_has_avx2();
  return supported ? &k : nullptr;
#else
  return nullptr;
#endif
}

const Kernels* neon_kernels() {
#if defined(CHANORM_HAVE_NEON_TU)
  static const Kernels k{Level::neon, detail::dot_neon, detail::smooth_step_neon,
                         detail::axpy_neon, detail::abs2_neon};
  return &k;
#else
  return nullptr;
#endif
}

const Kernels& active() {
  static const Kernels& chosen = []() -> const Kernels& {
    if (const char* env = std::getenv("CHANORM_SIMD"); env && std::string_view(env) == "scalar")
      return scalar_kernels();
    if (const Kernels* k = avx2_kernels()) return *k;
    if (const Kernels* k = neon_kernels()) return *k;
    return scalar_kernels();
  }();
  return chosen;
}

}  // namespace chanorm::simd
