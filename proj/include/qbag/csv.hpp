#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace qbag::csv {

/// Shortest decimal string that round-trips the double exactly.
std::string format_double(double v);

std::vector<std::string> split_line(std::string_view line);

/// All lines of a file with trailing CR stripped. Throws LoadError if the
/// file cannot be opened.
std::vector<std::string> read_lines(const std::string& path);

double parse_double(std::string_view s, std::string_view what);
long parse_long(std::string_view s, std::string_view what);
unsigned long long parse_u64(std::string_view s, std::string_view what);

}  // namespace qbag::csv
