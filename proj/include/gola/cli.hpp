#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace gola::cli {

// Exit codes shared by every subcommand.
enum ExitCode : int {
    kOk = 0,
    kUsage = 2,    // bad flags, bad config, inconsistent inputs
    kIo = 3,       // unreadable, missing or corrupt files
    kNumeric = 4,  // divergence during training
};

inline constexpr const char* kToolVersion = "1.0.0";

// Runs `gola <subcommand> ...`; args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gola::cli
