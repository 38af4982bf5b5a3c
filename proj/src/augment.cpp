#include "crashxai/augment.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <regex>

#include "crashxai/error.hpp"
#include "crashxai/util.hpp"

namespace crashxai {

std::string_view to_string(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::NumbersPreserved: return "NumbersPreserved";
    case ConstraintKind::DatesTimesPreserved: return "DatesTimesPreserved";
    case ConstraintKind::ProperNounsPreserved: return "ProperNounsPreserved";
    case ConstraintKind::NoNullMarkers: return "NoNullMarkers";
    case ConstraintKind::ChronologyPreserved: return "ChronologyPreserved";
  }
  return "Unknown";
}

std::vector<PreservationConstraint> default_constraints() {
  return {{ConstraintKind::NumbersPreserved, {}},
          {ConstraintKind::DatesTimesPreserved, {}},
          {ConstraintKind::ProperNounsPreserved, {}},
          {ConstraintKind::NoNullMarkers, {"nan", "unknown", "n/a"}},
          {ConstraintKind::ChronologyPreserved, {}}};
}

void AugmentationConfig::validate() const {
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw Error(ErrorKind::InvalidConfig, "temperature must be in [0, 2]");
  }
  if (constraints.empty()) throw Error(ErrorKind::InvalidConfig, "constraints must be non-empty");
  if (batch_size < 1) throw Error(ErrorKind::InvalidConfig, "batch_size must be positive");
}

std::string augmentation_system_message(const AugmentationConfig& cfg) {
  std::string out = cfg.system_prompt + "\n\nGuidelines:";
  for (const auto& c : cfg.constraints) {
    switch (c.kind) {
      case ConstraintKind::NumbersPreserved:
        out += "\n- Keep every number (ages, years, speeds, widths, traffic volumes, "
               "mileposts, coordinates) exactly as given.";
        break;
      case ConstraintKind::DatesTimesPreserved:
        out += "\n- Keep all dates and times.";
        break;
      case ConstraintKind::ProperNounsPreserved:
        out += "\n- Keep all locations, route names and vehicle details.";
        break;
      case ConstraintKind::NoNullMarkers:
        out += "\n- Remove uninformative placeholders such as \"nan\" or \"unknown\".";
        break;
      case ConstraintKind::ChronologyPreserved:
        out += "\n- Preserve the chronological order of events.";
        break;
    }
  }
  out += "\n- Do not add facts that are not in the report. Reply with the rewritten report only.";
  return out;
}

bool ConstraintReport::passed() const {
  return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed; });
}

const ConstraintResult* ConstraintReport::find(ConstraintKind kind) const {
  for (const auto& r : results) {
    if (r.kind == kind) return &r;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// text analysis

namespace {

constexpr const char* kMonthNames[] = {"January", "February", "March",     "April",
                                       "May",     "June",     "July",      "August",
                                       "September", "October", "November", "December"};

int month_index(const std::string& name) {
  for (int i = 0; i < 12; ++i) {
    if (iequals(name, kMonthNames[i])) return i + 1;
  }
  return 0;
}

std::string iso_date(int y, int m, int d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", y, m, d);
  return buf;
}

const std::string& month_alternation() {
  static const std::string s =
      "(January|February|March|April|May|June|July|August|September|October|November|December)";
  return s;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

struct Span {
  std::size_t begin, end;
};

std::vector<std::pair<Span, TemporalToken>> temporal_with_spans(std::string_view text) {
  static const std::regex kMonthDayYear("\\b" + month_alternation() +
                                        "\\s+(\\d{1,2}),?\\s+(\\d{4})\\b");
  static const std::regex kDayMonthYear("\\b(\\d{1,2})\\s+" + month_alternation() +
                                        ",?\\s+(\\d{4})\\b");
  static const std::regex kIso("\\b(\\d{4})-(\\d{2})-(\\d{2})\\b");
  static const std::regex kSlash("\\b(\\d{1,2})/(\\d{1,2})/(\\d{4})\\b");
  static const std::regex kTime("\\b(\\d{1,2}):(\\d{2})(\\s*([AaPp])\\.?\\s*[Mm]\\b\\.?)?");

  const std::string s(text);
  std::vector<std::pair<Span, TemporalToken>> found;
  auto overlaps = [&](std::size_t b, std::size_t e) {
    return std::any_of(found.begin(), found.end(),
                       [&](const auto& f) { return b < f.first.end && f.first.begin < e; });
  };
  auto scan = [&](const std::regex& re, auto&& normalize) {
    for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator();
         ++it) {
      const auto& m = *it;
      const auto b = static_cast<std::size_t>(m.position(0));
      const auto e = b + static_cast<std::size_t>(m.length(0));
      if (overlaps(b, e)) continue;
      std::string norm = normalize(m);
      if (norm.empty()) continue;
      found.push_back({{b, e}, TemporalToken{std::move(norm), m.str(0), b}});
    }
  };
  scan(kMonthDayYear, [](const std::smatch& m) {
    return iso_date(std::stoi(m[3]), month_index(m[1]), std::stoi(m[2]));
  });
  scan(kDayMonthYear, [](const std::smatch& m) {
    return iso_date(std::stoi(m[3]), month_index(m[2]), std::stoi(m[1]));
  });
  scan(kIso, [](const std::smatch& m) {
    return iso_date(std::stoi(m[1]), std::stoi(m[2]), std::stoi(m[3]));
  });
  scan(kSlash, [](const std::smatch& m) {
    return iso_date(std::stoi(m[3]), std::stoi(m[1]), std::stoi(m[2]));
  });
  scan(kTime, [](const std::smatch& m) -> std::string {
    int h = std::stoi(m[1]);
    const int mi = std::stoi(m[2]);
    if (m[4].matched) {
      if (h < 1 || h > 12) return {};
      const bool pm = m[4].str() == "P" || m[4].str() == "p";
      h = h % 12 + (pm ? 12 : 0);
    }
    if (h > 23 || mi > 59) return {};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%02d:%02d", h, mi);
    return buf;
  });
  std::sort(found.begin(), found.end(),
            [](const auto& a, const auto& b) { return a.first.begin < b.first.begin; });
  return found;
}

}  // namespace

std::vector<TemporalToken> extract_temporal(std::string_view text) {
  std::vector<TemporalToken> out;
  for (auto& [span, tok] : temporal_with_spans(text)) out.push_back(std::move(tok));
  return out;
}

std::vector<std::string> extract_numbers(std::string_view text) {
  const auto temporal = temporal_with_spans(text);
  std::vector<std::string> out;
  for (const auto& [span, tok] : temporal) out.push_back(tok.normalized);

  std::string masked(text);
  for (const auto& [span, tok] : temporal) {
    std::fill(masked.begin() + static_cast<std::ptrdiff_t>(span.begin),
              masked.begin() + static_cast<std::ptrdiff_t>(span.end), ' ');
  }

  std::size_t i = 0;
  while (i < masked.size()) {
    if (!std::isdigit(static_cast<unsigned char>(masked[i]))) {
      ++i;
      continue;
    }
    // Identifier such as "097ARi" or "I5": keep the whole alphanumeric token.
    std::size_t start = i;
    while (start > 0 && is_word_char(masked[start - 1])) --start;
    std::size_t end = i;
    while (end < masked.size() && is_word_char(masked[end])) ++end;
    const std::string_view word(masked.data() + start, end - start);
    if (std::any_of(word.begin(), word.end(),
                    [](char c) { return std::isalpha(static_cast<unsigned char>(c)); })) {
      out.emplace_back(word);
      i = end;
      continue;
    }
    // Plain number: digits with optional 3-digit comma groups and a decimal part.
    std::size_t j = i;
    while (j < masked.size() && std::isdigit(static_cast<unsigned char>(masked[j]))) ++j;
    std::string literal(masked.substr(i, j - i));
    while (j + 3 < masked.size() + 0 && masked[j] == ',' &&
           std::isdigit(static_cast<unsigned char>(masked[j + 1])) &&
           std::isdigit(static_cast<unsigned char>(masked[j + 2])) &&
           std::isdigit(static_cast<unsigned char>(masked[j + 3])) &&
           (j + 4 >= masked.size() || !std::isdigit(static_cast<unsigned char>(masked[j + 4])))) {
      literal += masked.substr(j + 1, 3);
      j += 4;
    }
    if (j + 1 < masked.size() && masked[j] == '.' &&
        std::isdigit(static_cast<unsigned char>(masked[j + 1]))) {
      std::size_t k = j + 1;
      while (k < masked.size() && std::isdigit(static_cast<unsigned char>(masked[k]))) ++k;
      literal += masked.substr(j, k - j);
      j = k;
    }
    out.push_back(std::move(literal));
    i = j;
  }
  return out;
}

std::vector<std::string> extract_proper_nouns(std::string_view text) {
  static const std::set<std::string> kFunctionWords{
      "The", "A",     "An",     "On",     "At",    "In",     "It",    "This",   "That",
      "There", "Both", "Neither", "Its",  "Their", "During", "After", "Before", "While",
      "When", "Additional"};
  struct Word {
    std::string text;
    bool sentence_start;
    bool breaks_after;
  };
  std::vector<Word> words;
  bool sentence_start = true;
  for (const auto& raw : split(text, ' ')) {
    std::string_view tok = trim(raw);
    if (tok.empty()) continue;
    const bool ends_sentence = tok.back() == '.' || tok.back() == '!' || tok.back() == '?';
    const bool breaks = ends_sentence || tok.back() == ',' || tok.back() == ';' ||
                        tok.back() == ':' || tok.back() == ')';
    while (!tok.empty() && std::string_view(".,;:!?()\"'").find(tok.front()) != std::string_view::npos) {
      tok.remove_prefix(1);
    }
    while (!tok.empty() && std::string_view(".,;:!?()\"'").find(tok.back()) != std::string_view::npos) {
      tok.remove_suffix(1);
    }
    words.push_back({std::string(tok), sentence_start, breaks});
    sentence_start = ends_sentence;
  }

  auto capitalized = [](const std::string& w) {
    return !w.empty() && std::isupper(static_cast<unsigned char>(w.front()));
  };
  auto mixed_identifier = [](const std::string& w) {
    const bool digit = std::any_of(w.begin(), w.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
    const bool alpha = std::any_of(w.begin(), w.end(), [](char c) { return std::isalpha(static_cast<unsigned char>(c)); });
    return digit && alpha;
  };

  std::vector<std::string> out;
  std::vector<std::string> run;
  auto flush = [&] {
    if (run.size() >= 2) {
      std::string joined = run[0];
      for (std::size_t k = 1; k < run.size(); ++k) joined += " " + run[k];
      out.push_back(std::move(joined));
    }
    run.clear();
  };
  for (const auto& w : words) {
    const bool starts_run = capitalized(w.text) &&
                            !(w.sentence_start && kFunctionWords.contains(w.text));
    const bool continues_run = !run.empty() && (capitalized(w.text) || mixed_identifier(w.text));
    if (continues_run || (run.empty() && starts_run)) {
      run.push_back(w.text);
    } else {
      flush();
      if (starts_run) run.push_back(w.text);
    }
    if (w.breaks_after) flush();
  }
  flush();
  return out;
}

namespace {

std::string collapse_spaces(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}

std::vector<std::string> null_tokens(std::string_view text, const std::set<std::string>& markers) {
  std::vector<std::string> out;
  std::string tok;
  auto flush = [&] {
    std::string_view t(tok);
    while (!t.empty() && std::string_view(".,;:!?()\"'[]").find(t.front()) != std::string_view::npos) t.remove_prefix(1);
    while (!t.empty() && std::string_view(".,;:!?()\"'[]").find(t.back()) != std::string_view::npos) t.remove_suffix(1);
    if (!t.empty() && markers.contains(to_lower(t))) out.emplace_back(t);
    tok.clear();
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else {
      tok.push_back(c);
    }
  }
  flush();
  return out;
}

}  // namespace

ConstraintReport verify_preservation(std::string_view original, std::string_view augmented,
                                     const std::vector<PreservationConstraint>& constraints) {
  ConstraintReport report;
  for (const auto& c : constraints) {
    ConstraintResult r{c.kind, true, {}};
    switch (c.kind) {
      case ConstraintKind::NumbersPreserved: {
        std::map<std::string, int> have;
        for (auto& n : extract_numbers(augmented)) ++have[n];
        for (auto& n : extract_numbers(original)) {
          if (have[n]-- <= 0) r.offending.push_back(n);
        }
        break;
      }
      case ConstraintKind::DatesTimesPreserved: {
        std::set<std::string> have;
        for (auto& t : extract_temporal(augmented)) have.insert(t.normalized);
        for (auto& t : extract_temporal(original)) {
          if (!have.contains(t.normalized)) r.offending.push_back(t.surface);
        }
        break;
      }
      case ConstraintKind::ProperNounsPreserved: {
        const std::string hay = collapse_spaces(augmented);
        for (auto& e : extract_proper_nouns(original)) {
          if (hay.find(e) == std::string::npos) r.offending.push_back(e);
        }
        break;
      }
      case ConstraintKind::NoNullMarkers:
        r.offending = null_tokens(augmented, c.null_markers);
        break;
      case ConstraintKind::ChronologyPreserved: {
        // Dates and times are ordered separately: "at 8:00 PM on June 29"
        // and "on June 29 at 8:00 PM" describe the same moment.
        const auto is_time = [](const std::string& n) { return n.size() == 5 && n[2] == ':'; };
        for (const bool times : {false, true}) {
          std::vector<std::string> order;
          for (auto& t : extract_temporal(original)) {
            if (is_time(t.normalized) == times &&
                std::find(order.begin(), order.end(), t.normalized) == order.end()) {
              order.push_back(t.normalized);
            }
          }
          std::map<std::string, std::size_t> first_seen;
          std::size_t idx = 0;
          for (auto& t : extract_temporal(augmented)) {
            if (is_time(t.normalized) == times) first_seen.try_emplace(t.normalized, idx++);
          }
          std::size_t last = 0;
          bool any = false;
          for (const auto& t : order) {
            auto it = first_seen.find(t);
            if (it == first_seen.end()) continue;
            if (any && it->second < last) r.offending.push_back(t);
            last = std::max(last, it->second);
            any = true;
          }
        }
        break;
      }
    }
    r.passed = r.offending.empty();
    report.results.push_back(std::move(r));
  }
  return report;
}

std::string augment(std::string_view narrative, const ChatClient& client,
                    const AugmentationConfig& cfg) {
  cfg.validate();
  if (trim(narrative).empty()) throw Error(ErrorKind::InvalidArgument, "narrative is empty");
  ChatRequest req{augmentation_system_message(cfg), std::string(narrative), cfg.temperature,
                  cfg.model_name};
  std::string completion = complete_with_retry(client, req, cfg.retry);
  if (trim(completion).empty()) throw Error(ErrorKind::EmptyCompletion, "empty completion");
  return completion;
}

std::vector<AugmentedRecord> augment_batch(const std::vector<std::string>& narratives,
                                           const ChatClient& client,
                                           const AugmentationConfig& cfg) {
  cfg.validate();
  std::vector<AugmentedRecord> out(narratives.size());
  // Requests go out in chunks of batch_size, each chunk spread over
  // `concurrency` workers.
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  for (std::size_t start = 0; start < narratives.size(); start += batch) {
    const std::size_t count = std::min(batch, narratives.size() - start);
    parallel_for(count, cfg.concurrency, [&](std::size_t k) {
      const std::size_t i = start + k;
      const auto& original = narratives[i];
      AugmentedRecord& rec = out[i];
      try {
        std::string rewritten = augment(original, client, cfg);
        rec.report = verify_preservation(original, rewritten, cfg.constraints);
        if (rec.report.passed()) {
          rec.text = std::move(rewritten);
          return;
        }
      } catch (const Error& e) {
        rec.error = std::string(to_string(e.kind())) + ": " + e.what();
      }
      rec.text = original;
      rec.flagged = true;
    });
  }
  return out;
}

}  // namespace crashxai
