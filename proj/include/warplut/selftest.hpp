#pragma once

#include <string>
#include <vector>

namespace warplut {

struct SelftestOptions {
  // Test hook: run the catalog checks against a copy with one coefficient flipped.
  bool corrupt_catalog = false;
  unsigned seed = 12345;
};

struct SelftestResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Embedded invariant suite: catalog and transform round trips, node gradient
// checks, Gumbel marginals, SIMD kernel equivalence, netlist equivalence.
std::vector<SelftestResult> run_selftest(const SelftestOptions& options = {});

}  // namespace warplut
