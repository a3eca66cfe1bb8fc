#include "warplut/simd/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>

#include "warplut/relaxed_lut.hpp"

#define WARPLUT_AVX2 __attribute__((target("avx2,fma")))

namespace warplut::simd {

namespace {

// Cephes-style expf on 8 lanes; relative error around 2 ulp on [-88, 88].
WARPLUT_AVX2 inline __m256 exp_ps(__m256 x) {
  const __m256 hi = _mm256_set1_ps(88.3762626647949f);
  const __m256 lo = _mm256_set1_ps(-88.3762626647949f);
  // Operand order lets NaN through, matching the scalar path.
  x = _mm256_min_ps(hi, _mm256_max_ps(lo, x));

  __m256 fx = _mm256_fmadd_ps(x, _mm256_set1_ps(1.44269504088896341f), _mm256_set1_ps(0.5f));
  fx = _mm256_floor_ps(fx);
  x = _mm256_fnmadd_ps(fx, _mm256_set1_ps(0.693359375f), x);
  x = _mm256_fnmadd_ps(fx, _mm256_set1_ps(-2.12194440e-4f), x);

  __m256 y = _mm256_set1_ps(1.9875691500e-4f);
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.3981999507e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(8.3334519073e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(4.1665795894e-2f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.6666665459e-1f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(5.0000001201e-1f));
  const __m256 x2 = _mm256_mul_ps(x, x);
  y = _mm256_fmadd_ps(y, x2, x);
  y = _mm256_add_ps(y, _mm256_set1_ps(1.0f));

  __m256i n = _mm256_cvttps_epi32(fx);
  n = _mm256_add_epi32(n, _mm256_set1_epi32(127));
  n = _mm256_slli_epi32(n, 23);
  return _mm256_mul_ps(y, _mm256_castsi256_ps(n));
}

WARPLUT_AVX2 inline __m256 sigmoid_ps(__m256 z) {
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 e = exp_ps(_mm256_sub_ps(_mm256_setzero_ps(), z));
  return _mm256_div_ps(one, _mm256_add_ps(one, e));
}

WARPLUT_AVX2 inline __m256 b_tilde_ps(__m256 x) {
  const __m256 one = _mm256_set1_ps(1.0f);
  x = _mm256_min_ps(one, _mm256_max_ps(_mm256_setzero_ps(), x));
  return _mm256_sub_ps(_mm256_add_ps(x, x), one);
}

WARPLUT_AVX2 inline float hsum(__m256 v) {
  const __m128 lo = _mm256_castps256_ps128(v);
  const __m128 hi = _mm256_extractf128_ps(v, 1);
  __m128 s = _mm_add_ps(lo, hi);
  s = _mm_add_ps(s, _mm_movehl_ps(s, s));
  s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 0x55));
  return _mm_cvtss_f32(s);
}

WARPLUT_AVX2 void warp2_forward(const Warp2ForwardArgs& k) {
  const __m256 c0 = _mm256_set1_ps(k.coeffs[0]);
  const __m256 c1 = _mm256_set1_ps(k.coeffs[1]);
  const __m256 c2 = _mm256_set1_ps(k.coeffs[2]);
  const __m256 c3 = _mm256_set1_ps(k.coeffs[3]);
  const __m256 inv_tau = _mm256_set1_ps(k.inv_tau);
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 zero = _mm256_setzero_ps();

  std::size_t i = 0;
  for (; i + 8 <= k.lanes; i += 8) {
    const __m256 sa = b_tilde_ps(_mm256_loadu_ps(k.a + i));
    const __m256 sb = b_tilde_ps(_mm256_loadu_ps(k.b + i));
    // Same association order as the scalar kernel.
    __m256 l = _mm256_add_ps(c0, _mm256_mul_ps(c1, sa));
    l = _mm256_add_ps(l, _mm256_mul_ps(c2, sb));
    l = _mm256_add_ps(l, _mm256_mul_ps(c3, _mm256_mul_ps(sa, sb)));
    const __m256 ln = k.noise ? _mm256_add_ps(l, _mm256_loadu_ps(k.noise + i)) : l;
    if (k.hard) {
      const __m256 mask = _mm256_cmp_ps(ln, zero, _CMP_GE_OQ);
      _mm256_storeu_ps(k.out + i, _mm256_and_ps(mask, one));
      _mm256_storeu_ps(k.soft + i, sigmoid_ps(_mm256_mul_ps(k.soft_noisy ? ln : l, inv_tau)));
    } else {
      const __m256 s = sigmoid_ps(_mm256_mul_ps(ln, inv_tau));
      _mm256_storeu_ps(k.out + i, s);
      _mm256_storeu_ps(k.soft + i, s);
    }
  }
  if (i < k.lanes) {
    Warp2ForwardArgs tail = k;
    tail.a += i;
    tail.b += i;
    if (tail.noise) tail.noise += i;
    tail.out += i;
    tail.soft += i;
    tail.lanes -= i;
    scalar_kernels().warp2_forward(tail);
  }
}

WARPLUT_AVX2 void warp2_backward(const Warp2BackwardArgs& k) {
  const __m256 c1 = _mm256_set1_ps(k.coeffs[1]);
  const __m256 c2 = _mm256_set1_ps(k.coeffs[2]);
  const __m256 c3 = _mm256_set1_ps(k.coeffs[3]);
  const __m256 inv_tau = _mm256_set1_ps(k.inv_tau);
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 two = _mm256_set1_ps(2.0f);
  __m256 g0 = _mm256_setzero_ps(), g1 = g0, g2 = g0, g3 = g0;

  std::size_t i = 0;
  for (; i + 8 <= k.lanes; i += 8) {
    const __m256 sa = b_tilde_ps(_mm256_loadu_ps(k.a + i));
    const __m256 sb = b_tilde_ps(_mm256_loadu_ps(k.b + i));
    const __m256 s = _mm256_loadu_ps(k.soft + i);
    const __m256 ds = _mm256_mul_ps(
        _mm256_mul_ps(_mm256_loadu_ps(k.grad_out + i), _mm256_mul_ps(s, _mm256_sub_ps(one, s))),
        inv_tau);
    g0 = _mm256_add_ps(g0, ds);
    g1 = _mm256_fmadd_ps(ds, sa, g1);
    g2 = _mm256_fmadd_ps(ds, sb, g2);
    g3 = _mm256_fmadd_ps(ds, _mm256_mul_ps(sa, sb), g3);
    const __m256 ds2 = _mm256_mul_ps(two, ds);
    if (k.grad_a) {
      const __m256 da = _mm256_mul_ps(ds2, _mm256_fmadd_ps(c3, sb, c1));
      _mm256_storeu_ps(k.grad_a + i, _mm256_add_ps(_mm256_loadu_ps(k.grad_a + i), da));
    }
    if (k.grad_b) {
      const __m256 db = _mm256_mul_ps(ds2, _mm256_fmadd_ps(c3, sa, c2));
      _mm256_storeu_ps(k.grad_b + i, _mm256_add_ps(_mm256_loadu_ps(k.grad_b + i), db));
    }
  }
  k.grad_coeffs[0] += hsum(g0);
  k.grad_coeffs[1] += hsum(g1);
  k.grad_coeffs[2] += hsum(g2);
  k.grad_coeffs[3] += hsum(g3);
  if (i < k.lanes) {
    Warp2BackwardArgs tail = k;
    tail.a += i;
    tail.b += i;
    tail.soft += i;
    tail.grad_out += i;
    if (tail.grad_a) tail.grad_a += i;
    if (tail.grad_b) tail.grad_b += i;
    tail.lanes -= i;
    scalar_kernels().warp2_backward(tail);
  }
}

WARPLUT_AVX2 void eval_minterms(const std::uint64_t* const* inputs, const MintermProgram& p,
                                std::uint64_t* out, std::size_t words) {
  const __m256i ones = _mm256_set1_epi64x(-1);
  std::size_t w = 0;
  for (; w + 4 <= words; w += 4) {
    __m256i x[8];
    for (int i = 0; i < p.arity; ++i) {
      x[i] = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(inputs[i] + w));
    }
    __m256i acc = _mm256_setzero_si256();
    for (int m = 0; m < p.count; ++m) {
      const unsigned corner = p.minterms[m];
      __m256i term = ones;
      for (int i = 0; i < p.arity; ++i) {
        term = ((corner >> (p.arity - 1 - i)) & 1u) ? _mm256_and_si256(term, x[i])
                                                     : _mm256_andnot_si256(x[i], term);
      }
      acc = _mm256_or_si256(acc, term);
    }
    if (p.complement) acc = _mm256_xor_si256(acc, ones);
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + w), acc);
  }
  if (w < words) {
    const std::uint64_t* shifted[8];
    for (int i = 0; i < p.arity; ++i) shifted[i] = inputs[i] + w;
    scalar_kernels().eval_minterms(shifted, p, out + w, words - w);
  }
}

WARPLUT_AVX2 void max4(const float* a, const float* b, const float* c, const float* d, float* out,
                       std::uint8_t* arg, std::size_t lanes) {
  std::size_t i = 0;
  for (; i + 8 <= lanes; i += 8) {
    __m256 best = _mm256_loadu_ps(a + i);
    __m256i idx = _mm256_setzero_si256();
    const float* rest[3] = {b, c, d};
    for (int r = 0; r < 3; ++r) {
      const __m256 v = _mm256_loadu_ps(rest[r] + i);
      const __m256 gt = _mm256_cmp_ps(v, best, _CMP_GT_OQ);
      best = _mm256_blendv_ps(best, v, gt);
      idx = _mm256_blendv_epi8(idx, _mm256_set1_epi32(r + 1), _mm256_castps_si256(gt));
    }
    _mm256_storeu_ps(out + i, best);
    alignas(32) std::int32_t tmp[8];
    _mm256_store_si256(reinterpret_cast<__m256i*>(tmp), idx);
    for (int j = 0; j < 8; ++j) arg[i + j] = static_cast<std::uint8_t>(tmp[j]);
  }
  if (i < lanes) scalar_kernels().max4(a + i, b + i, c + i, d + i, out + i, arg + i, lanes - i);
}

}  // namespace

const Kernels* avx2_kernels() {
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  static const Kernels k{Level::Avx2, "avx2", &warp2_forward, &warp2_backward, &eval_minterms,
                         &max4};
  return supported ? &k : nullptr;
}

}  // namespace warplut::simd

#else

namespace warplut::simd {
const Kernels* avx2_kernels() { return nullptr; }
}  // namespace warplut::simd

#endif
