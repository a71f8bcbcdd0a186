#pragma once

#include <iosfwd>

namespace pgma::cli {

/// Runs one subcommand. Exit codes: 0 success, 1 configuration or usage
/// error, 2 data error (missing or malformed files), 3 numeric failure
/// (divergence, non-finite gradients).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pgma::cli
