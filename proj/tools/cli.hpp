#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vopt::cli {

inline constexpr const char* kVersion = "1.0.0";

/// Runs one `vopt` invocation. `args` excludes the program name. Returns the
/// process exit code: 0 ok, 1 usage or parse error, 2 infeasible or domain
/// error, 3 numerical breakdown.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);

}  // namespace vopt::cli
