#pragma once

#include <exception>

namespace dmt {

/// Exit codes: 0 ok, 2 invalid input, 3 training diverged, 4 no curve
/// crossing, 5 incompatible files, 6 theory check failed, 1 anything else.
int exit_code_for(std::exception_ptr error);

int run_cli(int argc, char** argv);

}  // namespace dmt
