#pragma once

#include <iosfwd>

namespace bwsl {

// Entry point of the bwsl tool. Returns 0 on success, 1 for usage errors,
// 2 for data errors and 3 for numeric or training failures; failures print
// one "bwsl: error=<kind> reason=..." line to err.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bwsl
