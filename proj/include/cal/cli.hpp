#pragma once

#include <string>
#include <vector>

namespace cal::cli {

/// Entry point behind the `cal` binary; also callable in-process from tests.
/// Exit codes: 0 success, 2 configuration/usage error, 3 runtime error.
int dispatch(const std::vector<std::string>& args);

}  // namespace cal::cli
