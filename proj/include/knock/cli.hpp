#pragma once

#include "knock/error.hpp"

namespace knock {

/// Process exit code for an error kind: 2 usage, 3 I/O or parse, 4 no
/// bimodal latency distribution, 5 quorum or insufficient data, 6 probe
/// requests emitted.
int exit_code_for(ErrorKind kind);

int run_cli(int argc, char** argv);

}  // namespace knock
