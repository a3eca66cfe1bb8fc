#pragma once

#include <array>
#include <string_view>

#include "warplut/truth_table.hpp"

namespace warplut {

inline constexpr int kGateCount = 16;

// Catalog ids, fixed by the published two-input gate table.
enum GateId : int {
  kConst0 = 0,
  kConst1 = 1,
  kAnd = 2,
  kOr = 3,
  kXor = 4,
  kXnor = 5,
  kNand = 6,
  kNor = 7,
  kAAndNotB = 8,
  kNotAAndB = 9,
  kIdA = 10,
  kNotA = 11,
  kIdB = 12,
  kNotB = 13,
  kImpAB = 14,
  kImpBA = 15,
};

struct GateCatalogEntry {
  int id;
  std::string_view name;      // display name, e.g. "ID(A)"
  std::string_view mnemonic;  // identifier used in logic-text netlists
  std::string_view formula;
  TruthTable table;
  WalshCoeffs coeffs;
};

using GateCatalog = std::array<GateCatalogEntry, kGateCount>;

const GateCatalog& gate_catalog();

// Id of the catalog gate with this table. Requires arity 2.
int classify_gate(const TruthTable& table);
int classify_gate(const GateCatalog& catalog, const TruthTable& table);

}  // namespace warplut
