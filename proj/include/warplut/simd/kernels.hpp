#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

// Data-parallel inner loops. Each kernel has a scalar reference and, where the
// CPU supports it, an AVX2 variant; active_kernels() picks one at runtime.
// The two are equivalence-tested in tests/unit/test_simd_kernels.cpp.
namespace warplut::simd {

enum class Level { Scalar, Avx2 };

// One 2-input Walsh node over a run of batch lanes:
//   l = c0 + c1*A + c2*B + c3*A*B,  A = 2a-1, B = 2b-1 (inputs clamped)
// Soft mode writes out = soft = sigmoid((l + noise) * inv_tau).
// Hard mode writes out = [l + noise >= 0] and keeps soft for the backward pass,
// with or without the noise depending on soft_noisy.
struct Warp2ForwardArgs {
  const float* coeffs;  // 4 values
  const float* a;
  const float* b;
  const float* noise;   // nullable
  float inv_tau;
  bool hard;
  bool soft_noisy;
  float* out;
  float* soft;
  std::size_t lanes;
};

// Accumulates into grad_coeffs (4 values) and, when non-null, grad_a/grad_b.
struct Warp2BackwardArgs {
  const float* coeffs;
  const float* a;
  const float* b;
  const float* soft;
  const float* grad_out;
  float inv_tau;
  float* grad_coeffs;
  float* grad_a;  // nullable
  float* grad_b;  // nullable
  std::size_t lanes;
};

// Sum-of-minterms form of an n-input truth table. Minterm k selects input i
// as a positive literal iff bit (arity-1-i) of k is set. When complement is
// set the minterms list the false corners and the result is inverted.
struct MintermProgram {
  int arity;
  bool complement;
  const std::uint8_t* minterms;
  int count;
};

struct Kernels {
  Level level;
  std::string_view name;
  void (*warp2_forward)(const Warp2ForwardArgs&);
  void (*warp2_backward)(const Warp2BackwardArgs&);
  void (*eval_minterms)(const std::uint64_t* const* inputs, const MintermProgram& program,
                        std::uint64_t* out, std::size_t words);
  // out[i] = max(a[i], b[i], c[i], d[i]); arg[i] = first index attaining it.
  void (*max4)(const float* a, const float* b, const float* c, const float* d, float* out,
               std::uint8_t* arg, std::size_t lanes);
};

const Kernels& scalar_kernels();
// nullptr when this build or CPU lacks AVX2+FMA.
const Kernels* avx2_kernels();

// Best supported level, overridable with WARPLUT_SIMD=scalar|avx2.
const Kernels& active_kernels();
const Kernels& kernels_for(Level level);

}  // namespace warplut::simd
