#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cfuse {

/// Runs one `causal_fuse` invocation. Returns 0 on success, 1 on a validation
/// error (nothing written) and 2 on a runtime failure (partial artifacts
/// removed). Messages go to `err`, reports to `out`.
int run_cli(std::vector<std::string> const& args, std::ostream& out, std::ostream& err);

int run_cli(int argc, char** argv);

}  // namespace cfuse
