#include "polysed/csv.hpp"

#include <charconv>
#include <fstream>

#include "polysed/types.hpp"

namespace polysed::csv {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

Table read(const std::filesystem::path& path, std::string_view expected_header) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  Table table;
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput(path.string() + " is empty");
  table.header = split_line(line);
  const auto expected = split_line(expected_header);
  if (table.header != expected) {
    throw InvalidInput(path.string() + ": expected header '" + std::string(expected_header) + "'");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_line(line);
    if (fields.size() != expected.size()) {
      throw InvalidInput(path.string() + ":" + std::to_string(line_no) + ": expected " +
                         std::to_string(expected.size()) + " fields");
    }
    table.rows.push_back(std::move(fields));
  }
  return table;
}

double parse_double(const std::string& field, std::string_view what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(field, &used);
    if (used != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw InvalidInput("invalid number for " + std::string(what) + ": '" + field + "'");
  }
}

long long parse_int(const std::string& field, std::string_view what) {
  long long v = 0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc{} || ptr != end) {
    throw InvalidInput("invalid integer for " + std::string(what) + ": '" + field + "'");
  }
  return v;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace polysed::csv
