#pragma once

#include <ostream>

namespace vpt {

// Entry point of the `vpt` binary. Returns the process exit code: 0 success,
// 1 usage or configuration error, 2 data error, 3 numeric failure.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vpt
