#pragma once

namespace rollalign::cli {

enum ExitCode : int {
    kOk = 0,
    kInvalidInput = 2,
    kNumericalFailure = 3,
    kProtocolMismatch = 4,
};

// Entry point of the rollalign command-line tool; returns the process exit code.
int run(int argc, char** argv);

}  // namespace rollalign::cli
