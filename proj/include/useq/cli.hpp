#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace useq {

/// Entry point of the `useq` command. Exit codes: 0 pass, 1 tolerance
/// failure, 2 configuration error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace useq
