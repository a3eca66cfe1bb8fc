#include <cmath>

#include "warplut/relaxed_lut.hpp"
#include "warplut/simd/kernels.hpp"

namespace warplut::simd {

namespace {

void warp2_forward(const Warp2ForwardArgs& k) {
  const float c0 = k.coeffs[0], c1 = k.coeffs[1], c2 = k.coeffs[2], c3 = k.coeffs[3];
  for (std::size_t i = 0; i < k.lanes; ++i) {
    const float sa = b_tilde(k.a[i]);
    const float sb = b_tilde(k.b[i]);
    const float l = c0 + c1 * sa + c2 * sb + c3 * (sa * sb);
    const float ln = k.noise ? l + k.noise[i] : l;
    if (k.hard) {
      k.out[i] = ln >= 0.0f ? 1.0f : 0.0f;
      k.soft[i] = sigmoid((k.soft_noisy ? ln : l) * k.inv_tau);
    } else {
      const float s = sigmoid(ln * k.inv_tau);
      k.out[i] = s;
      k.soft[i] = s;
    }
  }
}

void warp2_backward(const Warp2BackwardArgs& k) {
  const float c1 = k.coeffs[1], c2 = k.coeffs[2], c3 = k.coeffs[3];
  float g0 = 0, g1 = 0, g2 = 0, g3 = 0;
  for (std::size_t i = 0; i < k.lanes; ++i) {
    const float sa = b_tilde(k.a[i]);
    const float sb = b_tilde(k.b[i]);
    const float s = k.soft[i];
    const float ds = k.grad_out[i] * s * (1.0f - s) * k.inv_tau;
    g0 += ds;
    g1 += ds * sa;
    g2 += ds * sb;
    g3 += ds * (sa * sb);
    if (k.grad_a) k.grad_a[i] += 2.0f * ds * (c1 + c3 * sb);
    if (k.grad_b) k.grad_b[i] += 2.0f * ds * (c2 + c3 * sa);
  }
  k.grad_coeffs[0] += g0;
  k.grad_coeffs[1] += g1;
  k.grad_coeffs[2] += g2;
  k.grad_coeffs[3] += g3;
}

void eval_minterms(const std::uint64_t* const* inputs, const MintermProgram& p, std::uint64_t* out,
                   std::size_t words) {
  for (std::size_t w = 0; w < words; ++w) {
    std::uint64_t acc = 0;
    for (int m = 0; m < p.count; ++m) {
      const unsigned corner = p.minterms[m];
      std::uint64_t term = ~std::uint64_t{0};
      for (int i = 0; i < p.arity; ++i) {
        const std::uint64_t x = inputs[i][w];
        term &= ((corner >> (p.arity - 1 - i)) & 1u) ? x : ~x;
      }
      acc |= term;
    }
    out[w] = p.complement ? ~acc : acc;
  }
}

void max4(const float* a, const float* b, const float* c, const float* d, float* out,
          std::uint8_t* arg, std::size_t lanes) {
  for (std::size_t i = 0; i < lanes; ++i) {
    float best = a[i];
    std::uint8_t idx = 0;
    if (b[i] > best) best = b[i], idx = 1;
    if (c[i] > best) best = c[i], idx = 2;
    if (d[i] > best) best = d[i], idx = 3;
    out[i] = best;
    arg[i] = idx;
  }
}

}  // namespace

const Kernels& scalar_kernels() {
  static const Kernels k{Level::Scalar, "scalar", &warp2_forward, &warp2_backward, &eval_minterms,
                         &max4};
  return k;
}

}  // namespace warplut::simd
