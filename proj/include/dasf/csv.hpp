#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace dasf::csv {

// Minimal reader for the comma-separated files used by the toolkit: one
// header row, no quoting, `.` decimal point, blank lines ignored.
struct Table {
  std::string origin;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  // 1-based line number in the source of each row, for diagnostics.
  std::vector<std::size_t> lines;

  // Column index by name; throws InputError naming the origin when missing.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
};

Table read(std::istream& in, const std::string& origin);
Table read_file(const std::string& path);

std::vector<std::string> split_line(std::string_view line);

// Strict full-field conversions; throw InputError with origin/line context.
double to_double(std::string_view field, const std::string& origin, std::size_t line);
int to_int(std::string_view field, const std::string& origin, std::size_t line);

}  // namespace dasf::csv
