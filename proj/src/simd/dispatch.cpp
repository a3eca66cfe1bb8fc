#include <cstdlib>
#include <string_view>

#include "warplut/error.hpp"
#include "warplut/simd/kernels.hpp"

namespace warplut::simd {

const Kernels& kernels_for(Level level) {
  if (level == Level::Avx2) {
    if (const Kernels* k = avx2_kernels()) return *k;
    throw Error("AVX2 kernels requested but not supported on this CPU");
  }
  return scalar_kernels();
}

const Kernels& active_kernels() {
  static const Kernels& chosen = [] () -> const Kernels& {
    const char* env = std::getenv("WARPLUT_SIMD");
    const std::string_view want = env ? env : "auto";
    if (want == "scalar") return scalar_kernels();
    if (want == "avx2") return kernels_for(Level::Avx2);
    if (const Kernels* k = avx2_kernels()) return *k;
    return scalar_kernels();
  }();
  return chosen;
}

}  // namespace warplut::simd
