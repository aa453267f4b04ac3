#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mmexit {

struct DefaultEntry {
    std::string name;
    std::string value;
    std::string meaning;
};

/// Every default used by the command line, in one place. Flags override them.
const std::vector<DefaultEntry>& cli_defaults();

/// Runs the command line. Returns 0 on success, 1 on validation failure, 2 on numerical
/// failure, 3 on argument errors; failures are also written to `err` as one JSON line.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace mmexit
