#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "warplut/relaxed_lut.hpp"
#include "warplut/simd/kernels.hpp"
#include "warplut/truth_table.hpp"

using namespace warplut;
using simd::Kernels;

namespace {

std::vector<float> uniform(std::size_t n, float lo, float hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> d(lo, hi);
  std::vector<float> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

std::vector<const Kernels*> all_kernels() {
  std::vector<const Kernels*> ks{&simd::scalar_kernels()};
  if (simd::avx2_kernels()) ks.push_back(simd::avx2_kernels());
  return ks;
}

}  // namespace

TEST_CASE("scalar forward matches the double-precision relaxed node") {
  std::mt19937_64 rng(1);
  const std::size_t lanes = 53;
  const auto a = uniform(lanes, -0.2f, 1.2f, rng), b = uniform(lanes, 0, 1, rng);
  const auto c = uniform(4, -1, 1, rng);
  std::vector<float> out(lanes), soft(lanes);
  simd::scalar_kernels().warp2_forward({c.data(), a.data(), b.data(), nullptr, 1.0f / 0.7f, false,
                                        false, out.data(), soft.data(), lanes});
  RelaxParams p;
  p.tau_relax = 0.7;
  const WalshCoeffs w(2, {c[0], c[1], c[2], c[3]});
  for (std::size_t i = 0; i < lanes; ++i) {
    const std::vector<double> x{a[i], b[i]};
    CHECK(out[i] == doctest::Approx(relaxed_eval(w, x, p)).epsilon(1e-6));
  }
}

TEST_CASE("avx2 forward and backward agree with scalar") {
  const Kernels* fast = simd::avx2_kernels();
  if (!fast) {
    MESSAGE("avx2 unavailable, nothing to compare");
    return;
  }
  const Kernels& ref = simd::scalar_kernels();
  std::mt19937_64 rng(2);
  for (std::size_t lanes : {1u, 7u, 8u, 9u, 64u, 203u}) {
    for (int variant = 0; variant < 4; ++variant) {
      const bool hard = variant >= 2;
      const bool noisy = variant % 2 == 1;
      const auto a = uniform(lanes, -0.1f, 1.1f, rng), b = uniform(lanes, 0, 1, rng);
      const auto noise = uniform(lanes, -4, 4, rng);
      const auto c = uniform(4, -2, 2, rng);
      std::vector<float> o1(lanes), s1(lanes), o2(lanes), s2(lanes);
      simd::Warp2ForwardArgs args{c.data(), a.data(), b.data(), noisy ? noise.data() : nullptr,
                                  1.3f, hard, noisy, o1.data(), s1.data(), lanes};
      ref.warp2_forward(args);
      args.out = o2.data();
      args.soft = s2.data();
      fast->warp2_forward(args);
      for (std::size_t i = 0; i < lanes; ++i) {
        REQUIRE(o2[i] == doctest::Approx(o1[i]).epsilon(1e-5));
        REQUIRE(s2[i] == doctest::Approx(s1[i]).epsilon(1e-5));
      }

      const auto g = uniform(lanes, -1, 1, rng);
      std::vector<float> gc1(4, 0), gc2(4, 0), ga1(lanes), gb1(lanes), ga2(lanes), gb2(lanes);
      simd::Warp2BackwardArgs bargs{c.data(), a.data(), b.data(), s1.data(), g.data(), 1.3f,
                                    gc1.data(), ga1.data(), gb1.data(), lanes};
      ref.warp2_backward(bargs);
      bargs.grad_coeffs = gc2.data();
      bargs.grad_a = ga2.data();
      bargs.grad_b = gb2.data();
      fast->warp2_backward(bargs);
      for (int k = 0; k < 4; ++k) REQUIRE(gc2[k] == doctest::Approx(gc1[k]).epsilon(1e-4).scale(1e-3));
      for (std::size_t i = 0; i < lanes; ++i) {
        REQUIRE(ga2[i] == doctest::Approx(ga1[i]).epsilon(1e-5).scale(1e-2));
        REQUIRE(gb2[i] == doctest::Approx(gb1[i]).epsilon(1e-5).scale(1e-2));
      }
    }
  }
}

TEST_CASE("backward accumulates and tolerates null input gradients") {
  for (const Kernels* k : all_kernels()) {
    const std::vector<float> c{0.1f, 0.2f, -0.3f, 0.4f}, a{0.3f, 0.8f}, b{0.5f, 0.1f};
    std::vector<float> out(2), soft(2);
    k->warp2_forward({c.data(), a.data(), b.data(), nullptr, 1.0f, false, false, out.data(),
                      soft.data(), 2});
    const std::vector<float> g{1.0f, 1.0f};
    std::vector<float> gc(4, 0.0f);
    k->warp2_backward({c.data(), a.data(), b.data(), soft.data(), g.data(), 1.0f, gc.data(), nullptr,
                       nullptr, 2});
    const auto once = gc;
    k->warp2_backward({c.data(), a.data(), b.data(), soft.data(), g.data(), 1.0f, gc.data(), nullptr,
                       nullptr, 2});
    for (int i = 0; i < 4; ++i) CHECK(gc[i] == doctest::Approx(2 * once[i]));
    // d out / d c0 = sum soft(1 - soft)
    CHECK(once[0] == doctest::Approx(soft[0] * (1 - soft[0]) + soft[1] * (1 - soft[1])));
  }
}

TEST_CASE("eval_minterms matches the truth table for arity 1..6") {
  std::mt19937_64 rng(3);
  const std::size_t words = 5;
  for (const Kernels* k : all_kernels()) {
    for (int n = 1; n <= kMaxArity; ++n) {
      for (int trial = 0; trial < 20; ++trial) {
        const std::size_t size = std::size_t{1} << n;
        const std::uint64_t mask = size == 64 ? rng() : rng() & ((std::uint64_t{1} << size) - 1);
        const TruthTable t(n, mask);
        // Both encodings of the same table must agree.
        for (bool complement : {false, true}) {
          std::vector<std::uint8_t> mins;
          for (std::size_t c = 0; c < size; ++c) {
            if (t.bit(c) != complement) mins.push_back(static_cast<std::uint8_t>(c));
          }
          std::vector<std::vector<std::uint64_t>> in(static_cast<std::size_t>(n));
          std::vector<const std::uint64_t*> ptrs;
          for (auto& w : in) {
            w.resize(words);
            for (auto& x : w) x = rng();
            ptrs.push_back(w.data());
          }
          std::vector<std::uint64_t> out(words);
          k->eval_minterms(ptrs.data(),
                           {n, complement, mins.data(), static_cast<int>(mins.size())}, out.data(),
                           words);
          for (std::size_t w = 0; w < words; ++w) {
            for (int bit = 0; bit < 64; ++bit) {
              std::size_t corner = 0;
              for (int i = 0; i < n; ++i) corner = (corner << 1) | ((in[i][w] >> bit) & 1u);
              REQUIRE(((out[w] >> bit) & 1u) == static_cast<std::uint64_t>(t.bit(corner)));
            }
          }
        }
      }
    }
  }
}

TEST_CASE("max4 returns the first maximum") {
  for (const Kernels* k : all_kernels()) {
    std::mt19937_64 rng(4);
    const std::size_t lanes = 29;
    std::vector<float> a(lanes), b(lanes), c(lanes), d(lanes);
    std::uniform_int_distribution<int> small(0, 2);
    for (std::size_t i = 0; i < lanes; ++i) {
      a[i] = static_cast<float>(small(rng));
      b[i] = static_cast<float>(small(rng));
      c[i] = static_cast<float>(small(rng));
      d[i] = static_cast<float>(small(rng));
    }
    std::vector<float> out(lanes);
    std::vector<std::uint8_t> arg(lanes);
    k->max4(a.data(), b.data(), c.data(), d.data(), out.data(), arg.data(), lanes);
    for (std::size_t i = 0; i < lanes; ++i) {
      const float v[4] = {a[i], b[i], c[i], d[i]};
      int best = 0;
      for (int j = 1; j < 4; ++j) {
        if (v[j] > v[best]) best = j;
      }
      REQUIRE(out[i] == v[best]);
      REQUIRE(arg[i] == best);
    }
  }
}

TEST_CASE("dispatch honours the requested level") {
  CHECK(simd::kernels_for(simd::Level::Scalar).level == simd::Level::Scalar);
  if (simd::avx2_kernels()) CHECK(simd::kernels_for(simd::Level::Avx2).level == simd::Level::Avx2);
}
