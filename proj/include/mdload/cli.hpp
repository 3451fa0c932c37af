#pragma once

#include <iosfwd>

namespace mdload {

/// Exit codes: 0 success, 1 verification or runtime failure, 2 usage error.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mdload
