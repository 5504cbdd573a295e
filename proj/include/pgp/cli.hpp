#pragma once

#include <iosfwd>

namespace pgp {

inline constexpr const char* kVersion = "1.0.0";

// Entry point behind the `pgp` executable. Exit codes: 0 success,
// 1 runtime or numerical failure, 2 usage or input error.
// Keeps large blocks on the heap instead of fresh mmaps. The fit allocates
// several n x n matrices per objective call and page faults otherwise
// dominate. No-op outside glibc.
void tune_allocator();

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pgp
