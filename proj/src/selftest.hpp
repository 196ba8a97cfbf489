#pragma once

#include <ostream>

namespace diffanon {

// Built-in oracle and invariant checks, one line per check. Returns the
// number of failed checks.
int run_selftest(std::ostream& out);

}  // namespace diffanon
