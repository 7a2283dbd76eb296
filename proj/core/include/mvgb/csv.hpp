#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mvgb/types.hpp"

namespace mvgb {

// Shortest decimal string that round-trips the double exactly.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    if (back == v) break;
  }
  return buf;
}

// Splits one CSV line on commas. No quoting support: the formats this tool
// reads and writes never embed commas in fields.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.emplace_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

// Parses a CSV cell as a double. Empty cells and the literal token "NA"
// (case-sensitive) mean missing and yield nullopt. Anything else must parse
// completely as a finite number.
inline std::optional<double> parse_cell(std::string_view cell,
                                        const std::string& where) {
  // Trim ASCII whitespace around the token.
  while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t'))
    cell.remove_prefix(1);
  while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t'))
    cell.remove_suffix(1);
  if (cell.empty() || cell == "NA") return std::nullopt;
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last)
    throw DataError("unparseable numeric cell '" + std::string(cell) + "' at " + where);
  if (!std::isfinite(v))
    throw DataError("non-finite value '" + std::string(cell) + "' at " + where);
  return v;
}

inline std::string join_csv(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += fields[i];
  }
  return line;
}

}  // namespace mvgb
