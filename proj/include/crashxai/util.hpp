#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace crashxai {

std::string read_text_file(const std::string& path);

/// Writes via a sibling temp file and rename so readers never observe a
/// partially written output.
void write_file_atomic(const std::string& path, std::string_view contents);

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split(std::string_view s, char delim);
bool iequals(std::string_view a, std::string_view b);

/// Shortest decimal text that round-trips the value ("22.4", "47.9512", "60").
std::string format_number(double value);
/// Fixed-point rendering with `digits` decimals, locale independent.
std::string format_fixed(double value, int digits);
/// Integer with thousands separators ("4,800").
std::string format_thousands(long long value);

/// Seeded generator whose derived draws are identical on every platform
/// (the standard distributions are implementation defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  /// Uniform real in [lo, hi).
  double uniform(double lo, double hi);

 private:
  std::mt19937_64 engine_;
};

/// Runs body(i) for i in [0, n) on up to `jobs` threads. Exceptions from any
/// worker are rethrown (the one with the lowest index wins).
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body);

}  // namespace crashxai
