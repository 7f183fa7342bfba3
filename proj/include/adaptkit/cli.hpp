#pragma once

#include <ostream>

namespace adaptkit::cli {

// Stable exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;       // bad flags or flag combinations
inline constexpr int kExitValidation = 2;  // validation, compatibility, digest, not-found, ambiguity
inline constexpr int kExitIo = 3;          // file system or network failures

// Runs one command. Machine-readable results (JSON) go to `out`, human
// messages to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace adaptkit::cli
