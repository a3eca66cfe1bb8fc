#include "warplut/gate_catalog.hpp"

#include "warplut/error.hpp"

namespace warplut {

namespace {

GateCatalogEntry entry(int id, std::string_view name, std::string_view mnemonic,
                       std::string_view formula, std::string_view table,
                       std::vector<double> coeffs) {
  return GateCatalogEntry{id, name, mnemonic, formula, TruthTable::from_string(table),
                          WalshCoeffs(2, std::move(coeffs))};
}

GateCatalog build_catalog() {
  return GateCatalog{
      entry(kConst0, "CONST0", "CONST0", "0", "0000", {-1, 0, 0, 0}),
      entry(kConst1, "CONST1", "CONST1", "1", "1111", {1, 0, 0, 0}),
      entry(kAnd, "AND", "AND", "a & b", "0001", {-0.5, 0.5, 0.5, 0.5}),
      entry(kOr, "OR", "OR", "a | b", "0111", {0.5, 0.5, 0.5, -0.5}),
      entry(kXor, "XOR", "XOR", "a ^ b", "0110", {0, 0, 0, -1}),
      entry(kXnor, "XNOR", "XNOR", "!(a ^ b)", "1001", {0, 0, 0, 1}),
      entry(kNand, "NAND", "NAND", "!(a & b)", "1110", {0.5, -0.5, -0.5, -0.5}),
      entry(kNor, "NOR", "NOR", "!(a | b)", "1000", {-0.5, -0.5, -0.5, 0.5}),
      entry(kAAndNotB, "A AND NOT B", "ANDNB", "a & !b", "0010", {-0.5, 0.5, -0.5, -0.5}),
      entry(kNotAAndB, "NOT A AND B", "ANDNA", "!a & b", "0100", {-0.5, -0.5, 0.5, -0.5}),
      entry(kIdA, "ID(A)", "IDA", "a", "0011", {0, 1, 0, 0}),
      entry(kNotA, "NOT(A)", "NOTA", "!a", "1100", {0, -1, 0, 0}),
      entry(kIdB, "ID(B)", "IDB", "b", "0101", {0, 0, 1, 0}),
      entry(kNotB, "NOT(B)", "NOTB", "!b", "1010", {0, 0, -1, 0}),
      entry(kImpAB, "IMP(a->b)", "IMPAB", "!a | b", "1101", {0.5, -0.5, 0.5, 0.5}),
      entry(kImpBA, "IMP(b->a)", "IMPBA", "!b | a", "1011", {0.5, 0.5, -0.5, 0.5}),
  };
}

}  // namespace

const GateCatalog& gate_catalog() {
  static const GateCatalog catalog = build_catalog();
  return catalog;
}

int classify_gate(const GateCatalog& catalog, const TruthTable& table) {
  if (table.arity() != 2) throw ShapeError("gate classification requires a 2-input table");
  for (const auto& e : catalog) {
    if (e.table == table) return e.id;
  }
  throw Error("truth table " + table.to_string() + " missing from gate catalog");
}

int classify_gate(const TruthTable& table) {
  // Direct lookup: the catalog order is a permutation of the 16 masks.
  static const auto by_mask = [] {
    std::array<int, 16> m{};
    for (const auto& e : gate_catalog()) m[e.table.mask()] = e.id;
    return m;
  }();
  if (table.arity() != 2) throw ShapeError("gate classification requires a 2-input table");
  return by_mask[table.mask()];
}

}  // namespace warplut
