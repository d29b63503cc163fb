#pragma once

#include <exception>
#include <iosfwd>
#include <string>
#include <vector>

namespace lottery {

// Exit statuses of ltlab.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitPartial = 3;
inline constexpr int kExitCorrupt = 4;

// Maps a failure to its exit status: config and argument errors 2, partial
// failures 3, corrupt artifacts and stale records 4, anything else 1.
int exit_status(const std::exception& e);

// Runs ltlab on `args` (without the program name).
int run_ltlab(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lottery
