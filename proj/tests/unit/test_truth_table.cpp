#include <doctest.h>

#include <bit>
#include <cmath>
#include <random>

#include "warplut/error.hpp"
#include "warplut/truth_table.hpp"

using namespace warplut;

namespace {

// Direct O(4^n) Walsh sum: c_S = 2^-n * sum_x f(x) * prod_{i in S} B(x_i),
// with corners MSB-first (input 0 is the most significant bit) and S given as
// a bitmask over inputs (bit j = input j).
std::vector<double> walsh_oracle(const TruthTable& t) {
  const int n = t.arity();
  const std::size_t size = std::size_t{1} << n;
  std::vector<double> c(size, 0.0);
  for (std::size_t s = 0; s < size; ++s) {
    double acc = 0.0;
    for (std::size_t k = 0; k < size; ++k) {
      double chi = 1.0;
      for (int i = 0; i < n; ++i) {
        if ((s >> i) & 1u) chi *= ((k >> (n - 1 - i)) & 1u) ? 1.0 : -1.0;
      }
      acc += (t.bit(k) ? 1.0 : -1.0) * chi;
    }
    c[s] = acc / static_cast<double>(size);
  }
  return c;
}

TruthTable random_table(int n, std::mt19937_64& rng) {
  std::uint64_t m = rng();
  if (n < 6) m &= (std::uint64_t{1} << (1u << n)) - 1;
  return TruthTable(n, m);
}

}  // namespace

TEST_CASE("corner convention is MSB-first with input 0 most significant") {
  CHECK(corner_input_bit(0b10, 0, 2) == 1);
  CHECK(corner_input_bit(0b10, 1, 2) == 0);
  const auto ida = TruthTable::from_string("0011");
  CHECK(ida.arity() == 2);
  CHECK(ida.mask() == 0b1100);
  const std::uint8_t a1b0[2] = {1, 0};
  const std::uint8_t a0b1[2] = {0, 1};
  CHECK(ida.evaluate(a1b0));
  CHECK_FALSE(ida.evaluate(a0b1));
  CHECK(ida.to_string() == "0011");
}

TEST_CASE("parity-3 mask is 0x96") {
  std::string s;
  for (int k = 0; k < 8; ++k) s += std::popcount(static_cast<unsigned>(k)) % 2 ? '1' : '0';
  CHECK(TruthTable::from_string(s).mask() == 0x96);
}

TEST_CASE("from_string rejects bad input and arity is capped") {
  CHECK_THROWS_AS(TruthTable::from_string("011"), ShapeError);
  CHECK_THROWS_AS(TruthTable::from_string("0a11"), ShapeError);
  CHECK_THROWS(check_arity(0));
  CHECK_THROWS(check_arity(7));
  CHECK_NOTHROW(check_arity(6));
}

TEST_CASE("walsh transform matches the direct sum for every arity-3 table") {
  for (std::uint64_t m = 0; m < 256; ++m) {
    const TruthTable t(3, m);
    const auto want = walsh_oracle(t);
    const auto got = walsh_transform(t);
    for (std::size_t s = 0; s < want.size(); ++s) REQUIRE(got[s] == want[s]);
  }
}

TEST_CASE("walsh transform matches the direct sum for random arity 1..6 tables") {
  std::mt19937_64 rng(1);
  for (int n = 1; n <= 6; ++n) {
    for (int i = 0; i < 50; ++i) {
      const TruthTable t = random_table(n, rng);
      const auto want = walsh_oracle(t);
      const auto got = walsh_transform(t);
      for (std::size_t s = 0; s < want.size(); ++s) REQUIRE(got[s] == doctest::Approx(want[s]).epsilon(1e-15));
    }
  }
}

TEST_CASE("known two-input coefficients") {
  const auto xor_c = walsh_transform(TruthTable::from_string("0110"));
  CHECK(xor_c[0] == 0.0);
  CHECK(xor_c[3] == -1.0);
  const auto and_c = walsh_transform(TruthTable::from_string("0001"));
  CHECK(and_c[0] == -0.5);
  CHECK(and_c[1] == 0.5);
  CHECK(and_c[2] == 0.5);
  CHECK(and_c[3] == 0.5);
}

TEST_CASE("property: Parseval, lattice and round trip for random tables") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 500; ++i) {
    const int n = 1 + i % 6;
    const TruthTable t = random_table(n, rng);
    const auto c = walsh_transform(t);
    double energy = 0.0;
    for (std::size_t s = 0; s < t.size(); ++s) {
      energy += c[s] * c[s];
      const double scaled = c[s] * static_cast<double>(t.size());
      REQUIRE(scaled == std::round(scaled));
    }
    REQUIRE(energy == doctest::Approx(1.0).epsilon(1e-12));
    REQUIRE(nearest_truth_table(c) == t);
    for (std::size_t k = 0; k < t.size(); ++k) {
      REQUIRE(corner_logit(c, k) == doctest::Approx(t.bit(k) ? 1.0 : -1.0));
    }
  }
}

TEST_CASE("property: perturbations with L1 norm below 1 never change the projection") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const int n = 1 + i % 6;
    const TruthTable t = random_table(n, rng);
    const auto c = walsh_transform(t);
    const auto v = c.values();
    std::vector<double> d(v.size());
    double l1 = 0.0;
    for (auto& x : d) l1 += std::fabs(x = u(rng));
    const double scale = 0.99 / l1;
    std::vector<double> p(v.begin(), v.end());
    for (std::size_t s = 0; s < p.size(); ++s) p[s] += d[s] * scale;
    REQUIRE(nearest_truth_table(WalshCoeffs(n, p)) == t);
  }
}

TEST_CASE("projection ties resolve to true") {
  CHECK(nearest_truth_table(WalshCoeffs(2)).mask() == 0xF);
  CHECK(nearest_truth_table(WalshCoeffs(2, {0.0, 1.0, 1.0, 0.0})).to_string() == "0111");
}

TEST_CASE("float overload agrees with the double projection") {
  const float c[4] = {0.1f, -0.7f, 0.3f, 0.2f};
  CHECK(nearest_truth_table(std::span<const float>(c, 4), 2) ==
        nearest_truth_table(WalshCoeffs(2, {0.1, -0.7, 0.3, 0.2})));
}
