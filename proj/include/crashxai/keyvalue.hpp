#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace crashxai {

/// One logical line of a sectioned text file.
///
/// Format shared by the config, lexicon, template, grouping-rule and
/// category files:
///
///     # comment
///     [section]
///     key = value
///     bare line
///
/// A section header is `[name]` with name made of letters, digits, `_`, `.`
/// and `-`. Blank lines and lines starting with `#` are skipped.
/// Keys and values are trimmed; `raw` keeps the trimmed line verbatim.
struct KeyValueLine {
  std::string section;
  std::string key;
  std::string value;
  std::string raw;
  bool has_value = false;
  std::size_t line = 0;
};

std::vector<KeyValueLine> parse_key_value(std::string_view text);
std::vector<KeyValueLine> read_key_value_file(const std::string& path);

}  // namespace crashxai
