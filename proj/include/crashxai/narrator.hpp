#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "crashxai/schema.hpp"

namespace crashxai {

/// Code-to-phrase tables plus the set of non-informative values.
///
/// File layout (sectioned key-value text):
///
///     [null_markers]          # optional; replaces the default set
///     nan
///     [lighting]              # one section per coded field
///     3 = under dusk conditions
///     [extra.vehicle_type]    # decodes the extra column VEHICLE_TYPE
///     @alias = surface_condition   # reuse another section's table
///     [route_designation]     # substring of route_id -> road name prefix
///     AR = Alternate Route
///     * = State Route
class Lexicon {
 public:
  Lexicon();

  static Lexicon parse(std::string_view text);
  static Lexicon load(const std::string& path);

  /// Case-insensitive; the empty string always counts.
  bool is_null_marker(std::string_view value) const;
  /// True when any whitespace/punctuation-delimited token is a null marker.
  bool contains_null_marker(std::string_view text) const;
  bool has_table(const std::string& field) const;
  std::optional<std::string> lookup(const std::string& field, const std::string& code) const;
  std::string road_name(const std::string& route_id) const;

  void set_phrase(const std::string& field, const std::string& code, const std::string& phrase);
  const std::set<std::string>& null_markers() const { return null_markers_; }

 private:
  const std::map<std::string, std::string>* table(const std::string& field) const;

  std::set<std::string> null_markers_;  // stored lower-case
  std::map<std::string, std::map<std::string, std::string>> tables_;
  std::map<std::string, std::string> aliases_;
  std::vector<std::pair<std::string, std::string>> route_designations_;
};

/// Field name/phrase pairs of one record, in normalization order.
struct NormalizedRecord {
  std::vector<std::pair<std::string, std::string>> fields;

  std::optional<std::string> get(std::string_view name) const;
  /// Phrases of every `extra.*` field.
  std::vector<std::string> extras() const;
};

struct NormalizedUnit {
  NormalizedRecord vehicle;
  std::vector<NormalizedRecord> persons;
};

struct NormalizedCase {
  std::string caseno;
  Severity label = Severity::NoApparentOrMinor;
  NormalizedRecord scene;     // crash + segment fields
  NormalizedRecord outcome;   // severity phrasing only
  std::vector<NormalizedUnit> units;
  std::vector<std::string> warnings;
};

/// Decodes every coded field, drops null-marked values and exact duplicate
/// phrases within a record. Unmapped codes pass through verbatim with a
/// warning.
NormalizedCase normalize(const CrashCase& c, const Lexicon& lexicon);

enum class Section { Descriptive, Outcome };
enum class Scope { Case, Vehicle, Person };

/// One sentence of a template block. `{slot}` is required, `{slot?}` is
/// optional; an absent optional slot elides its enclosing `[...]` group, or
/// the whole sentence when it is not inside a group.
struct SentenceTemplate {
  struct Part {
    enum class Kind { Text, Slot, GroupBegin, GroupEnd } kind = Kind::Text;
    std::string text;  // literal text or slot name
    bool optional = false;
  };
  std::string source;
  std::vector<Part> parts;

  static SentenceTemplate parse(std::string_view text, std::size_t line = 0);
  std::vector<std::string> slots() const;
};

struct NarrativeTemplate {
  Section section = Section::Descriptive;
  Scope scope = Scope::Case;
  std::vector<SentenceTemplate> sentences;
};

/// Template blocks in file order; section headers are
/// `[descriptive.case]`, `[descriptive.vehicle]`, `[descriptive.person]` and
/// `[outcome.case]`. Every slot name is validated against the fields its
/// scope can see, and literal text may not contain a null marker.
std::vector<NarrativeTemplate> parse_templates(std::string_view text, const Lexicon& lexicon);
std::vector<NarrativeTemplate> load_templates(const std::string& path, const Lexicon& lexicon);

/// Slot names visible from a scope (its own fields plus enclosing scopes).
const std::set<std::string>& slot_names(Scope scope);

struct NarrativePair {
  std::string caseno;
  std::string descriptive;
  std::string outcome;
  Severity label = Severity::NoApparentOrMinor;

  bool operator==(const NarrativePair&) const = default;
};

NarrativePair render(const NormalizedCase& c, const std::vector<NarrativeTemplate>& templates);

/// Outcome phrase for a label ("no apparent or minor injury", ...).
std::string_view outcome_phrase(Severity s);

std::string narratives_to_jsonl(const std::vector<NarrativePair>& narratives);
std::vector<NarrativePair> narratives_from_jsonl(std::string_view text);

}  // namespace crashxai
