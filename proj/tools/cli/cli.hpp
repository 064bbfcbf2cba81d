#pragma once

#include <ostream>

namespace imbp::cli {

/// Entry point shared by the `imbp` executable and the in-process tests.
/// Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace imbp::cli
