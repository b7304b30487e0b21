#pragma once

namespace mixhmm {

/// Entry point behind the mixhmm binary. Exit codes: 0 success, 2 input
/// validation failure, 3 numerical failure, 4 bad command line.
int run_cli(int argc, const char* const* argv);

}  // namespace mixhmm
