#pragma once

#include <exception>
#include <ostream>

namespace holofuse::cli {

// Runs one `holofuse <command> ...` invocation and returns its exit code:
// 0 ok, 2 config, 3 data, 4 leakage, 5 numeric, 1 anything else.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

[[nodiscard]] int exit_code(const std::exception& e) noexcept;

// Relative output paths are placed under this directory when it is set.
inline constexpr const char* kOutRootEnv = "HOLOFUSE_OUT_ROOT";

}  // namespace holofuse::cli
