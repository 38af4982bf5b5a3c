#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "crashxai/attribution.hpp"
#include "crashxai/chat.hpp"

namespace crashxai {

enum class AspectCategory { Environmental, VehicleOccupant, Behavioral, Infrastructure, Unusual };

inline constexpr std::array<AspectCategory, 5> kAllAspects{
    AspectCategory::Environmental, AspectCategory::VehicleOccupant, AspectCategory::Behavioral,
    AspectCategory::Infrastructure, AspectCategory::Unusual};

/// JSON key: "environmental", "vehicle_occupant", "behavioral",
/// "infrastructure", "unusual".
std::string_view aspect_key(AspectCategory a);
/// Human-readable label used in exports ("Vehicle and Occupant").
std::string_view aspect_label(AspectCategory a);
std::optional<AspectCategory> parse_aspect(std::string_view key);

struct FactorTerm {
  std::string term;
  double score = 0.0;
  /// Byte offset of the term's first occurrence in the narrative; used to
  /// break score ties.
  std::size_t position = std::numeric_limits<std::size_t>::max();
};

struct CategorySummary {
  std::string summary;
  std::vector<FactorTerm> terms;  // score > 0, descending
};

enum class FactorSource { Llm, Rules };

struct FactorSummary {
  std::string caseno;
  std::array<CategorySummary, 5> categories;
  FactorSource source = FactorSource::Rules;

  CategorySummary& operator[](AspectCategory a) { return categories[static_cast<std::size_t>(a)]; }
  const CategorySummary& operator[](AspectCategory a) const {
    return categories[static_cast<std::size_t>(a)];
  }
};

/// Parses the five-category JSON object (optionally wrapped in prose or a
/// code fence). Terms with non-positive scores are dropped and the rest sorted
/// by descending score. Returns nullopt when the object or a key is missing.
std::optional<FactorSummary> parse_factor_json(std::string_view completion);

/// {"caseno", "source", "environmental": {"summary", "terms": [{"term","score"}]}, ...}
/// `indent` < 0 gives a single line (JSONL).
std::string factor_summary_to_json(const FactorSummary& s, int indent = 1);
FactorSummary factor_summary_from_json(std::string_view text);

/// Keyword lexicon for the offline categorizer. File format:
///
///     [environmental]
///     dusk
///     re:^(clear|cloudy)$
///     [ignore]
///     the
///
/// Sections: environmental, vehicle_occupant, behavioral, infrastructure,
/// ignore. Matching is case-insensitive on the word with surrounding
/// punctuation removed; the first matching section wins.
class CategoryLexicon {
 public:
  static CategoryLexicon parse(std::string_view text);
  static CategoryLexicon load(const std::string& path);

  /// nullopt for unmatched words; Unusual is never returned. `ignored` is set
  /// for stop words.
  std::optional<AspectCategory> classify(std::string_view word, bool* ignored = nullptr) const;

 private:
  struct Entry {
    std::optional<AspectCategory> aspect;  // nullopt = ignore
    std::string literal;
    std::optional<std::regex> pattern;
  };
  std::vector<Entry> entries_;
};

/// Strips leading/trailing punctuation that is not part of the term.
std::string clean_term(std::string_view word);

/// Deterministic categorizer: scored words go to the lexicon category they
/// match, unmatched scored words to Unusual. Repeated terms keep their best
/// score and first position.
FactorSummary rule_based_factors(std::string caseno, const std::vector<WordAttribution>& words,
                                 const CategoryLexicon& lexicon);

struct FactorPromptConfig {
  std::string system_prompt = default_system_prompt();
  std::string repair_instruction =
      "Your previous reply could not be used. Reply with only the JSON object, with all five "
      "keys (environmental, vehicle_occupant, behavioral, infrastructure, unusual), each "
      "holding \"summary\" and \"terms\".";
  std::string model_name = "gpt-4o";
  double temperature = 0.0;
  RetryPolicy retry;

  static std::string default_system_prompt();
};

/// Word attributions recovered from an annotated narrative, with positions
/// in the stripped text.
std::vector<WordAttribution> words_from_annotated(std::string_view annotated);

/// Sends the annotated narrative; one repair retry on an unusable reply, then
/// the rule-based categorizer over the narrative's annotations. Transport
/// failures (Error Unavailable) propagate.
FactorSummary summarize_factors(std::string caseno, std::string_view annotated,
                                const ChatClient& client, const FactorPromptConfig& cfg,
                                const CategoryLexicon& fallback);

/// Top-k terms for the four aspects (Unusual excluded): score descending,
/// ties by earlier position.
std::map<AspectCategory, std::vector<FactorTerm>> extract_top_factors(const FactorSummary& s,
                                                                      std::size_t k = 5);

/// Ordered `pattern => canonical name` rules, matched case-insensitively
/// against the whole factor text (regex search); the first match wins.
class GroupingRules {
 public:
  /// Throws Error(Validation) on a malformed line, a bad regex or a rule set
  /// that is not idempotent (a canonical name regrouping to something else).
  static GroupingRules parse(std::string_view text);
  static GroupingRules load(const std::string& path);

  std::string apply(std::string_view factor) const;
  std::size_t size() const { return rules_.size(); }

 private:
  struct Rule {
    std::string source;
    std::regex pattern;
    std::string canonical;
  };
  std::vector<Rule> rules_;
};

struct Factor {
  AspectCategory aspect;
  std::string name;

  auto operator<=>(const Factor&) const = default;
};

std::vector<Factor> semantic_group(const std::vector<Factor>& factors, const GroupingRules& rules);

/// Flattens extract_top_factors output into a factor list.
std::vector<Factor> to_factors(const std::map<AspectCategory, std::vector<FactorTerm>>& top);

struct CooccurrenceNode {
  Factor factor;
  long long count = 0;
};

struct CooccurrenceLink {
  Factor source;
  Factor target;
  long long count = 0;
};

struct CooccurrenceGraph {
  std::vector<CooccurrenceNode> nodes;  // sorted by factor
  std::vector<CooccurrenceLink> links;  // sorted by (source, target), source < target
};

/// Every unordered cross-aspect pair of distinct factors counted once per case.
CooccurrenceGraph cooccurrence(const std::vector<std::vector<Factor>>& cases);

std::string_view aspect_color(AspectCategory a);

/// {"aspects": [{"key","label","color"}], "nodes": [{"id","name","aspect","count"}],
///  "links": [{"source","target","count"}]} with links referring to node ids.
std::string sankey_json(const CooccurrenceGraph& g);
/// Parses and validates a Sankey JSON document (ids in range, counts >= 1,
/// node totals equal incident link sums). Throws Error(Validation).
CooccurrenceGraph parse_sankey_json(std::string_view text);
/// Standalone HTML page with an inline SVG rendering of the graph.
std::string sankey_html(const CooccurrenceGraph& g);

/// Standalone HTML heatmap of an annotated narrative: score >= threshold_hi in
/// red, 0 < score < threshold_hi in green, zero or unannotated words plain.
std::string heatmap_html(std::string_view caseno, std::string_view annotated,
                         double threshold_hi = 3.0);

std::string html_escape(std::string_view s);

}  // namespace crashxai
