#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace chronos::cli {

/// Runs one command line (without the program name). Returns the process
/// exit code: 0 on success, 10 + ErrorKind for library errors, 1 otherwise.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// 64-bit FNV-1a over the bytes of a file, as 16 lowercase hex digits.
std::string hash_file(const std::filesystem::path& path);

}  // namespace chronos::cli
