#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace warplut {

// Largest supported LUT fan-in; a full table then fits one 64-bit word.
inline constexpr int kMaxArity = 6;

// Index conventions shared by every module:
//
//  * Corner index k: the n input bits read most-significant-first, input 0
//    ("a") being the MSB. For n = 2 the corners are ordered 00, 01, 10, 11
//    and ID(A) has the table "0011".
//  * Coefficient index t: bit j of t is set iff input j belongs to the subset
//    S. For n = 2 the order is (c_empty, c_a, c_b, c_ab).
inline constexpr int corner_input_bit(std::size_t corner, int input, int arity) {
  return static_cast<int>((corner >> (arity - 1 - input)) & 1u);
}

void check_arity(int arity);

// Exact Boolean function of n inputs. Bit k of mask() is the output at corner k.
class TruthTable {
 public:
  TruthTable() = default;
  TruthTable(int arity, std::uint64_t bits);

  // Parses a string of '0'/'1' characters in corner order.
  static TruthTable from_string(std::string_view text);

  int arity() const noexcept { return arity_; }
  std::size_t size() const noexcept { return std::size_t{1} << arity_; }
  bool bit(std::size_t corner) const noexcept { return (bits_ >> corner) & 1u; }
  std::uint64_t mask() const noexcept { return bits_; }

  bool evaluate(std::span<const std::uint8_t> inputs) const;
  std::string to_string() const;

  friend bool operator==(const TruthTable&, const TruthTable&) = default;

 private:
  int arity_ = 1;
  std::uint64_t bits_ = 0;
};

// Real coefficient vector of length 2^n in coefficient-index order.
class WalshCoeffs {
 public:
  WalshCoeffs() = default;
  explicit WalshCoeffs(int arity);
  WalshCoeffs(int arity, std::vector<double> values);

  int arity() const noexcept { return arity_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  friend bool operator==(const WalshCoeffs&, const WalshCoeffs&) = default;

 private:
  int arity_ = 1;
  std::vector<double> values_ = {0.0, 0.0};
};

// +1 where the table is true, -1 elsewhere.
std::vector<double> signed_truth_vector(const TruthTable& table);

// Product over i in S of B(x_i) with B(0) = -1, B(1) = +1; +1 for S empty.
double character_value(std::size_t subset, std::size_t corner, int arity);

// Bipolar Walsh-Hadamard transform. Characters are the products above, which
// differs from the Sylvester ordering by (-1)^|S|; see README for why.
WalshCoeffs walsh_transform(const TruthTable& table);

double corner_logit(const WalshCoeffs& coeffs, std::size_t corner);

// Sign projection; a logit of exactly zero maps to true.
TruthTable nearest_truth_table(const WalshCoeffs& coeffs);
TruthTable nearest_truth_table(std::span<const float> coeffs, int arity);

}  // namespace warplut
