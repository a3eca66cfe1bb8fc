#include "warplut/truth_table.hpp"

#include <bit>
#include <string>

#include "warplut/error.hpp"

namespace warplut {

void check_arity(int arity) {
  if (arity < 1 || arity > kMaxArity) {
    throw ShapeError("LUT arity must be in [1, " + std::to_string(kMaxArity) + "], got " +
                     std::to_string(arity));
  }
}

namespace {

std::uint64_t table_mask(int arity) {
  return arity == 6 ? ~std::uint64_t{0} : (std::uint64_t{1} << (std::size_t{1} << arity)) - 1;
}

}  // namespace

TruthTable::TruthTable(int arity, std::uint64_t bits) : arity_(arity), bits_(bits) {
  check_arity(arity);
  if ((bits & ~table_mask(arity)) != 0) {
    throw ShapeError("truth table has bits beyond 2^" + std::to_string(arity) + " corners");
  }
}

TruthTable TruthTable::from_string(std::string_view text) {
  const std::size_t len = text.size();
  if (len < 2 || !std::has_single_bit(len)) {
    throw ShapeError("truth table string length must be a power of two >= 2, got " +
                     std::to_string(len));
  }
  const int arity = std::countr_zero(len);
  check_arity(arity);
  std::uint64_t bits = 0;
  for (std::size_t k = 0; k < len; ++k) {
    if (text[k] == '1') {
      bits |= std::uint64_t{1} << k;
    } else if (text[k] != '0') {
      throw ShapeError("truth table string may only contain '0' and '1'");
    }
  }
  return TruthTable(arity, bits);
}

bool TruthTable::evaluate(std::span<const std::uint8_t> inputs) const {
  if (inputs.size() != static_cast<std::size_t>(arity_)) {
    throw ShapeError("truth table evaluated with wrong input count");
  }
  std::size_t corner = 0;
  for (std::uint8_t v : inputs) corner = (corner << 1) | (v ? 1u : 0u);
  return bit(corner);
}

std::string TruthTable::to_string() const {
  std::string out(size(), '0');
  for (std::size_t k = 0; k < size(); ++k) {
    if (bit(k)) out[k] = '1';
  }
  return out;
}

WalshCoeffs::WalshCoeffs(int arity) : arity_(arity) {
  check_arity(arity);
  values_.assign(std::size_t{1} << arity, 0.0);
}

WalshCoeffs::WalshCoeffs(int arity, std::vector<double> values)
    : arity_(arity), values_(std::move(values)) {
  check_arity(arity);
  if (values_.size() != (std::size_t{1} << arity)) {
    throw ShapeError("coefficient vector length must be 2^" + std::to_string(arity) + ", got " +
                     std::to_string(values_.size()));
  }
}

std::vector<double> signed_truth_vector(const TruthTable& table) {
  std::vector<double> out(table.size());
  for (std::size_t k = 0; k < table.size(); ++k) out[k] = table.bit(k) ? 1.0 : -1.0;
  return out;
}

double character_value(std::size_t subset, std::size_t corner, int arity) {
  int negatives = 0;
  for (int j = 0; j < arity; ++j) {
    if (((subset >> j) & 1u) && corner_input_bit(corner, j, arity) == 0) ++negatives;
  }
  return (negatives & 1) ? -1.0 : 1.0;
}

WalshCoeffs walsh_transform(const TruthTable& table) {
  const int n = table.arity();
  const std::size_t size = table.size();

  // Reorder into input-bit order (bit j <=> input j) so the butterfly lines up
  // with the coefficient index; corner order has input 0 as the MSB.
  std::vector<double> work(size);
  for (std::size_t k = 0; k < size; ++k) {
    std::size_t u = 0;
    for (int j = 0; j < n; ++j) u |= static_cast<std::size_t>(corner_input_bit(k, j, n)) << j;
    work[u] = table.bit(k) ? 1.0 : -1.0;
  }

  // Sylvester butterfly: work[S] = sum_u (-1)^{|S & u|} f(u).
  for (std::size_t half = 1; half < size; half <<= 1) {
    for (std::size_t base = 0; base < size; base += half << 1) {
      for (std::size_t i = base; i < base + half; ++i) {
        const double x = work[i];
        const double y = work[i + half];
        work[i] = x + y;
        work[i + half] = x - y;
      }
    }
  }

  // B(x) = 2x - 1 = -(-1)^x, so each member of S contributes one extra sign.
  const double scale = 1.0 / static_cast<double>(size);
  std::vector<double> coeffs(size);
  for (std::size_t s = 0; s < size; ++s) {
    const double sign = (std::popcount(s) & 1) ? -1.0 : 1.0;
    coeffs[s] = sign * work[s] * scale;
  }
  return WalshCoeffs(n, std::move(coeffs));
}

double corner_logit(const WalshCoeffs& coeffs, std::size_t corner) {
  const int n = coeffs.arity();
  if (corner >= coeffs.size()) throw ShapeError("corner index out of range");
  double acc = 0.0;
  for (std::size_t s = 0; s < coeffs.size(); ++s) acc += coeffs[s] * character_value(s, corner, n);
  return acc;
}

TruthTable nearest_truth_table(const WalshCoeffs& coeffs) {
  std::uint64_t bits = 0;
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    if (corner_logit(coeffs, k) >= 0.0) bits |= std::uint64_t{1} << k;
  }
  return TruthTable(coeffs.arity(), bits);
}

TruthTable nearest_truth_table(std::span<const float> coeffs, int arity) {
  check_arity(arity);
  if (coeffs.size() != (std::size_t{1} << arity)) throw ShapeError("coefficient length mismatch");
  return nearest_truth_table(WalshCoeffs(arity, std::vector<double>(coeffs.begin(), coeffs.end())));
}

}  // namespace warplut
