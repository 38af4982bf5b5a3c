#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace crashxai::csv {

struct Row {
  std::size_t line = 0;  // 1-based physical line where the record starts
  std::vector<std::string> fields;
};

/// RFC-4180 table: quoted fields may contain commas, CRLF and doubled quotes.
struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;

  std::optional<std::size_t> column(std::string_view name) const;
};

Table parse(std::istream& in);
Table parse(std::string_view text);
Table read_file(const std::string& path);

/// Quotes a field only when needed.
std::string escape(std::string_view field);

}  // namespace crashxai::csv
