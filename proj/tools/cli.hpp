#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace handxfer::cli {

// Runs one command line (argv[0] is the program name). Errors print as a
// single "stage: message" line on `err`; the return value is the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// 64-bit FNV-1a of the file contents, as 16 hex digits.
std::string file_hash(const std::string& path);

}  // namespace handxfer::cli
