#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace actdet::cli {

/// Entry point behind the `actdet` binary. `args` excludes the program name.
/// Data goes to files or `out`, diagnostics to `err`. Returns 0 on success,
/// 1 on usage or input errors, 2 on internal errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace actdet::cli
