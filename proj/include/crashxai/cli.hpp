#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "crashxai/schema.hpp"
#include "crashxai/tokenizer.hpp"

namespace crashxai {

/// Settings shared by all subcommands. Sources, lowest precedence first:
/// built-in defaults, the `--config` file, command-line flags.
struct PipelineConfig {
  std::string lexicon;
  std::string templates;
  std::string grouping_rules;
  std::string categories;
  std::string exemplars;
  std::string stub_fixture;
  ColumnMap columns;

  int L = 100;
  int b = 1;
  double display_divisor = 1.0;
  double threshold_hi = 3.0;
  double target_ratio = 0.0;  // 0 disables downsampling
  double temperature = 0.1;
  std::string endpoint;
  std::string model = "llama3-8b-instruct";
  bool offline = false;
  std::uint64_t seed = 0;
  int jobs = 1;
  int top_k = 5;
  int batch_size = 8;

  TokenizerMode tokenizer = TokenizerMode::Word;
  int min_count = 1;
  int dim = 32;
  int window = 16;
  int epochs = 30;
  double learning_rate = 0.5;

  /// Built-in defaults with data paths pointing at `data_dir`.
  static PipelineConfig defaults(const std::string& data_dir);
  /// Applies one `key = value` setting; throws Error(InvalidConfig) naming
  /// an unknown key or a bad value. Relative paths resolve against `base_dir`.
  void set(const std::string& key, const std::string& value, const std::string& base_dir = "");
  /// Applies every setting of a config file.
  void load_file(const std::string& path);
  void validate() const;

  static const std::vector<std::string>& keys();
};

/// Directory holding the bundled lexicon, templates, rules and corpus.
std::string bundled_data_dir();

/// Runs the command line (without the program name). Returns the exit code:
/// 0 success, 1 runtime error (reported as JSON on `err`), 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace crashxai
