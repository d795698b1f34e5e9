#pragma once

#include <ostream>

namespace eltrack {

/// Entry point of the command-line tool. Prints key=value summaries on
/// success; usage text and a nonzero code on bad input.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace eltrack
