#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mrwave {

/// Command-line driver: `mrwave <tran|pss|envelope> <netlist> [options]`.
/// Returns 0 on success, 1 on solver failure, 2 on usage or input errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace mrwave
