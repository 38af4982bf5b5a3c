#pragma once

#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "crashxai/cli.hpp"
#include "crashxai/util.hpp"

namespace testing_support {

namespace fs = std::filesystem;

struct RunResult {
  int code = 0;
  std::string out;
  std::string err;
};

inline RunResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = crashxai::run(args, out, err);
  return {code, out.str(), err.str()};
}

/// Fresh empty directory under the system temp dir.
inline fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("crashxai-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

/// Offline end-to-end run over the bundled corpus. Returns the exit code of
/// the first failing stage (0 when all succeed).
inline int run_pipeline(const fs::path& dir, const std::string& data_dir, std::string* log = nullptr) {
  const auto p = [&](const char* name) { return (dir / name).string(); };
  const std::vector<std::string> common{"--offline", "--seed", "7"};
  const std::vector<std::vector<std::string>> stages{
      {"ingest", "--corpus", data_dir + "/corpus", "--out", p("cases.jsonl"), "--report", p("ingest.json")},
      {"narrate", "--cases", p("cases.jsonl"), "--out", p("narratives.jsonl")},
      {"augment", "--narratives", p("narratives.jsonl"), "--out", p("augmented.jsonl"), "--report", p("augment.jsonl")},
      {"build-sft", "--narratives", p("augmented.jsonl"), "--out", p("sft.jsonl")},
      {"train-ref", "--sft", p("sft.jsonl"), "--model-out", p("model.json"), "--vocab-out", p("vocab.json")},
      {"attribute", "--model", p("model.json"), "--vocab", p("vocab.json"), "--narratives",
       p("augmented.jsonl"), "--method", "occlusion", "--out-dir", dir.string()},
      {"analyze", "--annotated", p("annotated-occlusion.jsonl"), "--out-dir", dir.string()},
      {"export", "--kind", "sankey", "--input", p("sankey.json"), "--out-dir", dir.string()},
      {"export", "--kind", "heatmap", "--input", p("annotated-occlusion.jsonl"), "--out-dir", dir.string()},
      {"eval", "--narratives", p("augmented.jsonl"), "--strategy", "zs", "--model", p("model.json"),
       "--vocab", p("vocab.json"), "--out-dir", dir.string()}};
  for (const auto& stage : stages) {
    std::vector<std::string> args = common;
    args.insert(args.end(), stage.begin(), stage.end());
    const auto r = run_cli(args);
    if (log) *log += r.out + r.err;
    if (r.code != 0) return r.code;
  }
  return 0;
}

/// Relative path to file contents for every regular file in `dir`.
inline std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) {
      files[fs::relative(e.path(), dir).string()] = crashxai::read_text_file(e.path().string());
    }
  }
  return files;
}

}  // namespace testing_support
