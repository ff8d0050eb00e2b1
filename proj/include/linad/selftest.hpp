#pragma once

#include <cstdint>
#include <ostream>

#include "linad/ir.hpp"

namespace linad {

struct SelftestOptions {
  std::uint64_t seed = 0;
  int corpus = 200;
};

// Runs the property suite: per-primitive derivative and transposition checks,
// then corpus-wide invariants over `corpus` generated programs. Prints one
// line per section plus the rule-count report. Returns 0 when every section
// passes, 1 otherwise.
int run_selftest(const SelftestOptions& opts, std::ostream& os);

} // namespace linad
