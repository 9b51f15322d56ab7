#ifndef FFORM_CLI_HPP
#define FFORM_CLI_HPP

#include <ostream>

namespace fform::cli {

/// Entry point of the `fform` tool. Returns the process exit code.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace fform::cli

#endif  // FFORM_CLI_HPP
