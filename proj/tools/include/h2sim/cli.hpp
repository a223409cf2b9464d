#pragma once

#include <iosfwd>

namespace h2sim {

/// h2sim verify|simulate|sweep --config <file> [--set key=value ...] --out <dir>
///
/// Exit codes: 0 success, 1 a verification check failed, 2 bad usage or config.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace h2sim
