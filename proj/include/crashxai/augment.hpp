#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "crashxai/chat.hpp"

namespace crashxai {

enum class ConstraintKind {
  NumbersPreserved,
  DatesTimesPreserved,
  ProperNounsPreserved,
  NoNullMarkers,
  ChronologyPreserved,
};

std::string_view to_string(ConstraintKind kind);

struct PreservationConstraint {
  ConstraintKind kind;
  /// NoNullMarkers: the markers to reject (lower-case). Unused otherwise.
  std::set<std::string> null_markers;
};

/// All five constraints with the default null markers.
std::vector<PreservationConstraint> default_constraints();

struct AugmentationConfig {
  /// Reconstructed editor persona; the guideline list is appended per constraint.
  std::string system_prompt =
      "You are a professional editor specializing in rewriting traffic accident reports. "
      "Rewrite the report you are given into a coherent, fluent narrative written in "
      "consistent professional language.";
  double temperature = 0.1;
  std::vector<PreservationConstraint> constraints = default_constraints();
  int batch_size = 8;
  int concurrency = 1;
  std::string model_name = "llama3-8b-instruct";
  std::string endpoint;
  RetryPolicy retry;

  /// Throws Error(InvalidConfig) on temperature outside [0, 2], an empty
  /// constraint list or a non-positive batch size.
  void validate() const;
};

/// System message actually sent: persona followed by one guideline per constraint.
std::string augmentation_system_message(const AugmentationConfig& cfg);

struct ConstraintResult {
  ConstraintKind kind;
  bool passed = true;
  std::vector<std::string> offending;
};

struct ConstraintReport {
  std::vector<ConstraintResult> results;

  bool passed() const;
  const ConstraintResult* find(ConstraintKind kind) const;
};

/// A date or clock time found in text, normalized to ISO form
/// ("2022-06-29", "20:00").
struct TemporalToken {
  std::string normalized;
  std::string surface;
  std::size_t position = 0;
};

std::vector<TemporalToken> extract_temporal(std::string_view text);
/// Numeric literals with thousands separators removed; dates and times appear
/// in their normalized form, identifiers mixing digits and letters verbatim.
std::vector<std::string> extract_numbers(std::string_view text);
/// Runs of two or more capitalized words (sentence-initial function words
/// excluded).
std::vector<std::string> extract_proper_nouns(std::string_view text);

ConstraintReport verify_preservation(std::string_view original, std::string_view augmented,
                                     const std::vector<PreservationConstraint>& constraints);

/// One rewrite request; the completion is returned untouched.
/// Throws Error(InvalidArgument) for an empty narrative, Error(Unavailable)
/// after retries and Error(EmptyCompletion) for a blank completion.
std::string augment(std::string_view narrative, const ChatClient& client,
                    const AugmentationConfig& cfg);

struct AugmentedRecord {
  std::string text;        // rewrite when verified, otherwise the original
  ConstraintReport report;
  bool flagged = false;    // true when the original was kept
  std::string error;       // transport/completion error, if any
};

/// Order-preserving batch rewrite. A record whose rewrite fails verification
/// (or whose request fails) keeps its original text and is flagged.
std::vector<AugmentedRecord> augment_batch(const std::vector<std::string>& narratives,
                                           const ChatClient& client,
                                           const AugmentationConfig& cfg);

}  // namespace crashxai
