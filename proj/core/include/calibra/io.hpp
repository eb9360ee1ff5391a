#pragma once

#include <string>

namespace calibra {

// Shortest decimal form that parses back to the same double (up to 17
// significant digits).
std::string fmt_double(double v);

std::string read_file(const std::string& path);

// Writes to a sibling temp file, then renames over the target.
void atomic_write_file(const std::string& path, const std::string& content);

}  // namespace calibra
