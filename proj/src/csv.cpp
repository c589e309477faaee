#include "dasf/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>

#include <fmt/core.h>

#include "dasf/error.hpp"

namespace dasf::csv {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    const auto piece = line.substr(start, comma == std::string_view::npos
                                              ? std::string_view::npos
                                              : comma - start);
    fields.emplace_back(trim(piece));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw InputError(fmt::format("{}: missing required column '{}'", origin, name));
}

bool Table::has_column(std::string_view name) const {
  for (const auto& h : header)
    if (h == name) return true;
  return false;
}

Table read(std::istream& in, const std::string& origin) {
  Table table;
  table.origin = origin;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_line(line);
    if (table.header.empty()) {
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size())
      throw InputError(fmt::format("{}:{}: expected {} fields, found {}", origin,
                                   line_no, table.header.size(), fields.size()));
    table.rows.push_back(std::move(fields));
    table.lines.push_back(line_no);
  }
  if (table.header.empty()) throw InputError(fmt::format("{}: empty file", origin));
  return table;
}

Table read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open '{}'", path));
  return read(in, path);
}

double to_double(std::string_view field, const std::string& origin, std::size_t line) {
  // std::from_chars for double is available in libstdc++ 11.
  double value = 0.0;
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (field.empty() || ec != std::errc() || ptr != end)
    throw InputError(fmt::format("{}:{}: not a number: '{}'", origin, line, field));
  return value;
}

int to_int(std::string_view field, const std::string& origin, std::size_t line) {
  int value = 0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (!field.empty() && ec == std::errc() && ptr == end) return value;
  // Accept integral values written as reals, e.g. "710.0".
  const double real = to_double(field, origin, line);
  if (real != std::floor(real) || std::abs(real) > 1e9)
    throw InputError(fmt::format("{}:{}: not an integer: '{}'", origin, line, field));
  return static_cast<int>(real);
}

}  // namespace dasf::csv
