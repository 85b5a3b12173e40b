#pragma once
#include <iosfwd>
#include <string>
#include <vector>

namespace mivs::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitNumerical = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kManifestSchema = 1;

// Entry point for `mivs <command> ...`; args excludes the program name.
// Returns the process exit code. Messages go to `out` and `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Lowercase hex SHA-256 of a file's bytes. Throws InputError if unreadable.
std::string sha256_file(const std::string& path);

} // namespace mivs::cli
