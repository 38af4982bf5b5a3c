#include "crashxai/keyvalue.hpp"

#include <cctype>

#include "crashxai/error.hpp"
#include "crashxai/util.hpp"

namespace crashxai {

namespace {

// `[name]` where name is a dotted identifier; anything else (e.g. a template
// line that opens with an optional group) is content.
bool is_section_header(std::string_view line) {
  if (line.size() < 3 || line.front() != '[' || line.back() != ']') return false;
  for (char c : line.substr(1, line.size() - 2)) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '.' && c != '-') {
      return false;
    }
  }
  return true;
}

}  // namespace

std::vector<KeyValueLine> parse_key_value(std::string_view text) {
  std::vector<KeyValueLine> out;
  std::string section;
  std::size_t lineno = 0;
  for (const auto& physical : split(text, '\n')) {
    ++lineno;
    const std::string_view line = trim(physical);
    if (line.empty() || line.front() == '#') continue;
    if (is_section_header(line)) {
      section = std::string(line.substr(1, line.size() - 2));
      continue;
    }
    KeyValueLine entry;
    entry.section = section;
    entry.raw = std::string(line);
    entry.line = lineno;
    const auto eq = line.find('=');
    if (eq != std::string_view::npos) {
      entry.key = std::string(trim(line.substr(0, eq)));
      entry.value = std::string(trim(line.substr(eq + 1)));
      entry.has_value = true;
    } else {
      entry.key = entry.raw;
    }
    out.push_back(std::move(entry));
  }
  return out;
}

std::vector<KeyValueLine> read_key_value_file(const std::string& path) {
  return parse_key_value(read_text_file(path));
}

}  // namespace crashxai
