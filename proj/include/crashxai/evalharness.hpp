#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crashxai/chat.hpp"
#include "crashxai/schema.hpp"

namespace crashxai {

enum class StrategyKind { ZeroShot, ZeroShotCoT, FewShot };

std::string_view to_string(StrategyKind k);  // "zs", "zs-cot", "fs"
std::optional<StrategyKind> parse_strategy(std::string_view text);

struct Exemplar {
  std::string narrative;
  Severity label = Severity::NoApparentOrMinor;
};

struct PromptStrategy {
  StrategyKind kind = StrategyKind::ZeroShot;
  /// FewShot only: exactly one exemplar per label (any order).
  std::vector<Exemplar> exemplars;

  void validate() const;
};

struct Prompt {
  std::string system;
  std::string user;
};

inline constexpr std::string_view kEngineerSystemPrompt = "You are a professional road safety engineer.";

/// Baseline prompts; the narrative follows the instructions after a blank line.
Prompt build_prompt(const PromptStrategy& strategy, std::string_view narrative);
/// system + "\n\n" + user, the form stored as golden snapshots.
std::string render_prompt(const Prompt& p);

/// Label strings used in responses and few-shot prompts.
std::string_view label_text(Severity s);  // "No apparent or minor injury" / "Serious injury or fatal"

enum class ParseStatus { Exact, Fuzzy, Failed };
std::string_view to_string(ParseStatus s);

struct ParsedLabel {
  std::optional<Severity> label;
  ParseStatus status = ParseStatus::Failed;
};

/// Exact tier: either label string (case- and punctuation-insensitive).
/// Fuzzy tier: distinguishing keywords ("serious", "fatal", "severe" versus
/// "minor", "no apparent"). CoT takes the last occurrence, other strategies
/// the first.
ParsedLabel parse_label(std::string_view raw_output, StrategyKind strategy);

struct Prediction {
  std::string caseno;
  std::string raw_output;
  std::optional<Severity> label;
  ParseStatus status = ParseStatus::Failed;
  Severity gold = Severity::NoApparentOrMinor;
};

struct MetricsReport {
  double macro_f1 = 0;
  double accuracy = 0;
  double macro_recall = 0;
  double macro_precision = 0;
  /// confusion[gold][predicted] over parsed predictions; index 0 is
  /// NoApparentOrMinor, 1 SeriousOrFatal.
  std::array<std::array<long long, 2>, 2> confusion{};
  /// Failed parses per gold class.
  std::array<long long, 2> failed{};
  long long n_failed_parses = 0;
  long long n = 0;
};

/// Failed parses count as misses for their gold class (lowering recall and
/// accuracy) but never as a predicted class. Throws Error(InvalidArgument)
/// when no prediction parsed.
MetricsReport compute_metrics(const std::vector<Prediction>& predictions);
/// Recomputes the four metrics from the confusion matrix and failure counts.
MetricsReport metrics_from_confusion(const std::array<std::array<long long, 2>, 2>& confusion,
                                     const std::array<long long, 2>& failed);

std::string metrics_to_json(const MetricsReport& m);
/// "Macro-F1  Accuracy  Macro-Recall  Macro-Precision" table, four decimals.
std::string format_metrics(const MetricsReport& m);

struct EvalCase {
  std::string caseno;
  std::string narrative;
  Severity gold = Severity::NoApparentOrMinor;
};

std::vector<Prediction> run_eval(const std::vector<EvalCase>& cases, const PromptStrategy& strategy,
                                 const ChatClient& client, const std::string& model_name,
                                 const RetryPolicy& retry, int jobs = 1);

std::string predictions_to_jsonl(const std::vector<Prediction>& preds);

// ---------------------------------------------------------------------------
// supervised fine-tuning data

inline constexpr std::string_view kSftQuestion = "Classify the injury severity of this crash.";

struct SftRecord {
  std::string caseno;
  std::string system;
  std::string user;
  std::string response;
  /// Byte offset in render_sft(record) where the response (and the loss) begins.
  std::size_t mask_boundary = 0;
};

/// system + "\n\n" + user + "\n\n" + response.
std::string render_sft(const SftRecord& r);

struct SftCase {
  std::string caseno;
  std::string descriptive;  // descriptive narrative only, never the outcome text
  Severity label = Severity::NoApparentOrMinor;
};

/// Throws Error(Validation) if a user field would contain a label string.
std::vector<SftRecord> build_sft_dataset(const std::vector<SftCase>& cases,
                                         std::string_view system_prompt = kEngineerSystemPrompt);
std::string sft_to_jsonl(const std::vector<SftRecord>& records);
std::vector<SftRecord> sft_from_jsonl(std::string_view text);
/// Label of an SFT response string.
std::optional<Severity> parse_label_text(std::string_view response);
/// Case-insensitive scan of each user field for either label string; returns
/// the offending casenos.
std::vector<std::string> leakage_scan(const std::vector<SftRecord>& records);

}  // namespace crashxai
