// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>

namespace sdcd {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitInvariant = 2;

/// Entry point of the `sdcd` tool. Subcommands: decode, compare, sweep, selfcheck,
/// suite. Returns kExitOk, kExitUsage (bad flags, unreadable or invalid input) or
/// kExitInvariant (a failed self-check or an internal invariant violation).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sdcd
