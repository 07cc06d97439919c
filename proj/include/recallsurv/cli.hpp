#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace recallsurv {

inline constexpr const char* kToolVersion = "0.1.0";

// Exit status: 0 on success, 2 on a usage error, 1 on a runtime error.
// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace recallsurv
