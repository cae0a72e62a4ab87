#ifndef TRAJINSPECT_CLI_HPP
#define TRAJINSPECT_CLI_HPP

#include <iosfwd>

namespace trajinspect {

/// Exit codes of the command-line driver.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitInternal = 2;

/// Runs one CLI invocation. The one-line JSON summary goes to `out`;
/// tables, warnings and errors go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace trajinspect

#endif  // TRAJINSPECT_CLI_HPP
