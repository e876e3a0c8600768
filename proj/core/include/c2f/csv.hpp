#pragma once

#include <string>
#include <vector>

namespace c2f::csv {

/// RFC-4180-style quoting: fields containing commas, quotes, or newlines are
/// wrapped in double quotes with embedded quotes doubled.
std::string format_row(const std::vector<std::string>& fields);

/// Shortest text that round-trips the double exactly under strtod.
std::string format_double(double v);

/// Parses quoted CSV back into rows of string fields.
std::vector<std::vector<std::string>> parse(const std::string& text);

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace c2f::csv
