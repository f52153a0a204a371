#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace polysed::csv {

/// Rows of a comma-separated file with a mandatory header.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> split_line(std::string_view line);
std::string trim(std::string_view s);

/// Reads a CSV and checks its header against `expected_header` (comma-joined).
Table read(const std::filesystem::path& path, std::string_view expected_header);

double parse_double(const std::string& field, std::string_view what);
long long parse_int(const std::string& field, std::string_view what);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

}  // namespace polysed::csv
