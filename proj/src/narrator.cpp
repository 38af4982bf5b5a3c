#include "crashxai/narrator.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>

#include <json.hpp>

#include "crashxai/error.hpp"
#include "crashxai/keyvalue.hpp"
#include "crashxai/util.hpp"

namespace crashxai {

namespace {

constexpr const char* kDefaultNullMarkers[] = {"", "nan", "unknown", "n/a"};

// Tokens for null-marker scanning: split on whitespace, then strip
// surrounding punctuation (keeps inner '/' so "N/A" stays whole).
std::vector<std::string_view> marker_tokens(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::string_view tok = text.substr(i, j - i);
    auto is_edge = [](char c) { return std::string_view(".,;:!?()\"'[]{}").find(c) != std::string_view::npos; };
    while (!tok.empty() && is_edge(tok.front())) tok.remove_prefix(1);
    while (!tok.empty() && is_edge(tok.back())) tok.remove_suffix(1);
    if (!tok.empty()) out.push_back(tok);
    i = j;
  }
  return out;
}

}  // namespace

Lexicon::Lexicon() {
  for (const char* m : kDefaultNullMarkers) null_markers_.insert(m);
}

Lexicon Lexicon::parse(std::string_view text) {
  Lexicon lex;
  bool custom_markers = false;
  for (const auto& e : parse_key_value(text)) {
    if (e.section.empty()) throw ParseError(e.line, "lexicon entry outside a section");
    if (e.section == "null_markers") {
      if (!custom_markers) {
        lex.null_markers_ = {""};
        custom_markers = true;
      }
      lex.null_markers_.insert(to_lower(e.raw));
      continue;
    }
    if (!e.has_value) throw ParseError(e.line, "expected 'code = phrase'");
    if (e.section == "route_designation") {
      lex.route_designations_.emplace_back(e.key, e.value);
      continue;
    }
    if (e.key == "@alias") {
      lex.aliases_[e.section] = e.value;
      continue;
    }
    lex.tables_[e.section][e.key] = e.value;
  }
  for (const auto& [field, entries] : lex.tables_) {
    for (const auto& [code, phrase] : entries) {
      if (lex.contains_null_marker(phrase)) {
        throw Error(ErrorKind::Validation, "lexicon phrase for " + field + "/" + code +
                                               " contains a null marker: '" + phrase + "'");
      }
    }
  }
  for (const auto& [from, to] : lex.aliases_) {
    if (!lex.tables_.contains(to)) {
      throw Error(ErrorKind::Validation, "lexicon alias " + from + " -> unknown section " + to);
    }
  }
  return lex;
}

Lexicon Lexicon::load(const std::string& path) { return parse(read_text_file(path)); }

bool Lexicon::is_null_marker(std::string_view value) const {
  return null_markers_.contains(to_lower(trim(value)));
}

bool Lexicon::contains_null_marker(std::string_view text) const {
  for (auto tok : marker_tokens(text)) {
    if (null_markers_.contains(to_lower(tok))) return true;
  }
  return false;
}

const std::map<std::string, std::string>* Lexicon::table(const std::string& field) const {
  std::string name = field;
  if (auto a = aliases_.find(field); a != aliases_.end()) name = a->second;
  auto it = tables_.find(name);
  return it == tables_.end() ? nullptr : &it->second;
}

bool Lexicon::has_table(const std::string& field) const { return table(field) != nullptr; }

std::optional<std::string> Lexicon::lookup(const std::string& field,
                                           const std::string& code) const {
  const auto* t = table(field);
  if (t == nullptr) return std::nullopt;
  auto it = t->find(std::string(trim(code)));
  if (it == t->end()) return std::nullopt;
  return it->second;
}

std::string Lexicon::road_name(const std::string& route_id) const {
  for (const auto& [needle, prefix] : route_designations_) {
    if (needle == "*" || route_id.find(needle) != std::string::npos) {
      return prefix + " " + route_id;
    }
  }
  return "State Route " + route_id;
}

void Lexicon::set_phrase(const std::string& field, const std::string& code,
                         const std::string& phrase) {
  tables_[field][code] = phrase;
}

std::optional<std::string> NormalizedRecord::get(std::string_view name) const {
  for (const auto& [k, v] : fields) {
    if (k == name) return v;
  }
  return std::nullopt;
}

std::vector<std::string> NormalizedRecord::extras() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : fields) {
    if (k.starts_with("extra.")) out.push_back(v);
  }
  return out;
}

std::string_view outcome_phrase(Severity s) {
  return s == Severity::SeriousOrFatal ? "a serious injury or fatality"
                                       : "no apparent or minor injury";
}

// ---------------------------------------------------------------------------
// normalize

namespace {

constexpr const char* kMonths[] = {"January", "February", "March",     "April",
                                   "May",     "June",     "July",      "August",
                                   "September", "October", "November", "December"};
constexpr const char* kWeekdays[] = {"Sunday",   "Monday", "Tuesday", "Wednesday",
                                     "Thursday", "Friday", "Saturday"};
constexpr const char* kNumberWords[] = {"zero", "one", "two",   "three", "four", "five",
                                        "six",  "seven", "eight", "nine", "ten"};

std::string number_word(long long n) {
  return n >= 0 && n <= 10 ? kNumberWords[n] : std::to_string(n);
}

class RecordBuilder {
 public:
  RecordBuilder(const Lexicon& lex, std::vector<std::string>& warnings, std::string where)
      : lex_(lex), warnings_(warnings), where_(std::move(where)) {}

  void put(const std::string& name, std::string phrase) {
    if (lex_.is_null_marker(phrase)) return;
    for (const auto& [k, v] : record_.fields) {
      if (v == phrase) {
        warnings_.push_back(where_ + ": dropped " + name + " (duplicate of " + k + ")");
        return;
      }
    }
    record_.fields.emplace_back(name, std::move(phrase));
  }

  /// Plain text value (county, make, ...): kept verbatim unless null-marked.
  void text(const std::string& name, const std::string& raw) {
    if (lex_.is_null_marker(raw)) return;
    const auto value = std::string(trim(raw));
    if (lex_.contains_null_marker(value)) {
      warnings_.push_back(where_ + ": dropped " + name + " value '" + value +
                          "' containing a null marker");
      return;
    }
    put(name, value);
  }

  void coded(const std::string& name, const std::string& raw) {
    if (lex_.is_null_marker(raw)) return;
    if (auto phrase = lex_.lookup(name, raw)) {
      put(name, *phrase);
      return;
    }
    const auto code = std::string(trim(raw));
    if (lex_.contains_null_marker(code)) {
      warnings_.push_back(where_ + ": dropped " + name + " code '" + code +
                          "' containing a null marker");
      return;
    }
    warnings_.push_back(where_ + ": unmapped " + name + " code '" + code + "' rendered verbatim");
    put(name, code);
  }

  void extras(const std::map<std::string, std::string>& extra) {
    for (const auto& [key, raw] : extra) {
      const std::string name = "extra." + to_lower(key);
      if (lex_.is_null_marker(raw)) continue;
      if (!lex_.has_table(name)) {
        warnings_.push_back(where_ + ": extra column " + key + " has no lexicon section; omitted");
        continue;
      }
      coded(name, raw);
    }
  }

  NormalizedRecord take() { return std::move(record_); }

 private:
  const Lexicon& lex_;
  std::vector<std::string>& warnings_;
  std::string where_;
  NormalizedRecord record_;
};

std::string format_date(const LocalDateTime& t) {
  return std::string(kMonths[t.month - 1]) + " " + std::to_string(t.day) + ", " +
         std::to_string(t.year);
}

std::string format_time(const LocalDateTime& t) {
  const int h12 = t.hour % 12 == 0 ? 12 : t.hour % 12;
  char buf[16];
  std::snprintf(buf, sizeof buf, "%d:%02d %s", h12, t.minute, t.hour < 12 ? "AM" : "PM");
  return buf;
}

std::string weekday_name(const LocalDateTime& t) {
  using namespace std::chrono;
  const year_month_day ymd{year{t.year}, month{static_cast<unsigned>(t.month)},
                           day{static_cast<unsigned>(t.day)}};
  return kWeekdays[weekday{sys_days{ymd}}.c_encoding()];
}

std::string feet(double v) { return format_number(v) + "-foot-wide"; }

}  // namespace

NormalizedCase normalize(const CrashCase& c, const Lexicon& lexicon) {
  NormalizedCase out;
  out.caseno = c.crash.caseno;
  out.label = c.crash.severity;
  const auto& r = c.crash;

  RecordBuilder scene(lexicon, out.warnings, "case " + r.caseno);
  scene.put("date", format_date(r.occurred_at));
  scene.put("day_of_week", weekday_name(r.occurred_at));
  scene.put("time", format_time(r.occurred_at));
  scene.text("county", r.county);
  if (!lexicon.is_null_marker(r.route_id)) scene.put("road_name", lexicon.road_name(r.route_id));
  scene.put("milepost", format_number(r.milepost));
  scene.coded("weather", r.weather);
  scene.coded("lighting", r.lighting);
  scene.coded("surface_condition", r.surface_condition);
  if (r.latitude) scene.put("latitude", format_number(*r.latitude));
  if (r.longitude) scene.put("longitude", format_number(*r.longitude));
  scene.put("hit_and_run", r.hit_and_run ? "a hit-and-run incident" : "not a hit-and-run incident");
  if (!c.units.empty()) {
    const auto n = static_cast<long long>(c.units.size());
    scene.put("vehicle_count", number_word(n) + (n == 1 ? " vehicle" : " vehicles"));
  }
  if (const auto& s = c.segment) {
    scene.put("locale", s->locale == Locale::Urban ? "urban" : "rural");
    scene.put("lane_count", number_word(s->lane_count) + "-lane");
    if (s->lane_width) scene.put("lane_width", feet(*s->lane_width) + " lane");
    if (s->left_shoulder_width) {
      scene.put("left_shoulder_width", feet(*s->left_shoulder_width) + " left shoulder");
    }
    if (s->right_shoulder_width) {
      scene.put("right_shoulder_width", feet(*s->right_shoulder_width) + " right shoulder");
    }
    if (s->speed_limit) scene.put("speed_limit", std::to_string(*s->speed_limit) + " mph");
    scene.coded("surface_type", s->surface_type);
    if (s->aadt) scene.put("aadt", format_thousands(*s->aadt));
  }
  scene.extras(r.extra);
  out.scene = scene.take();

  RecordBuilder outcome(lexicon, out.warnings, "case " + r.caseno);
  outcome.put("severity", std::string(outcome_phrase(r.severity)));
  out.outcome = outcome.take();

  for (const auto& u : c.units) {
    NormalizedUnit nu;
    const std::string where = "case " + r.caseno + " unit " + std::to_string(u.vehicle.unit_id);
    RecordBuilder veh(lexicon, out.warnings, where);
    veh.put("unit_id", std::to_string(u.vehicle.unit_id));
    veh.text("make", u.vehicle.make);
    veh.text("model", u.vehicle.model);
    if (u.vehicle.model_year) veh.put("model_year", std::to_string(*u.vehicle.model_year));
    veh.coded("maneuver", u.vehicle.maneuver);
    veh.extras(u.vehicle.extra);
    nu.vehicle = veh.take();
    for (const auto& p : u.persons) {
      RecordBuilder per(lexicon, out.warnings, where);
      per.put("role", std::string(to_string(p.role)));
      if (p.age) per.put("age", std::to_string(*p.age) + "-year-old");
      per.coded("sex", p.sex);
      per.coded("restraint", p.restraint);
      per.coded("airbag", p.airbag);
      per.coded("sobriety", p.sobriety);
      nu.persons.push_back(per.take());
    }
    out.units.push_back(std::move(nu));
  }
  return out;
}

// ---------------------------------------------------------------------------
// templates

SentenceTemplate SentenceTemplate::parse(std::string_view text, std::size_t line) {
  SentenceTemplate t;
  t.source = std::string(text);
  std::string literal;
  bool in_group = false;
  auto flush = [&] {
    if (!literal.empty()) t.parts.push_back({Part::Kind::Text, std::move(literal), false});
    literal.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '{') {
      const auto close = text.find('}', i);
      if (close == std::string_view::npos) throw ParseError(line, "unterminated slot");
      std::string name(trim(text.substr(i + 1, close - i - 1)));
      bool optional = false;
      if (!name.empty() && name.back() == '?') {
        optional = true;
        name.pop_back();
      }
      if (name.empty()) throw ParseError(line, "empty slot name");
      flush();
      t.parts.push_back({Part::Kind::Slot, std::move(name), optional});
      i = close;
    } else if (c == '[') {
      if (in_group) throw ParseError(line, "nested optional groups are not supported");
      flush();
      t.parts.push_back({Part::Kind::GroupBegin, {}, false});
      in_group = true;
    } else if (c == ']') {
      if (!in_group) throw ParseError(line, "unbalanced ']'");
      flush();
      t.parts.push_back({Part::Kind::GroupEnd, {}, false});
      in_group = false;
    } else if (c == '}') {
      throw ParseError(line, "unbalanced '}'");
    } else {
      literal.push_back(c);
    }
  }
  if (in_group) throw ParseError(line, "unterminated optional group");
  flush();
  return t;
}

std::vector<std::string> SentenceTemplate::slots() const {
  std::vector<std::string> out;
  for (const auto& p : parts) {
    if (p.kind == Part::Kind::Slot) out.push_back(p.text);
  }
  return out;
}

const std::set<std::string>& slot_names(Scope scope) {
  static const std::set<std::string> kCase{
      "date",       "day_of_week", "time",          "county",
      "road_name",  "milepost",    "weather",       "lighting",
      "surface_condition", "latitude", "longitude", "hit_and_run",
      "vehicle_count", "locale",   "lane_count",    "lane_width",
      "left_shoulder_width", "right_shoulder_width", "speed_limit",
      "surface_type", "aadt",      "extras",        "severity"};
  static const std::set<std::string> kVehicle = [] {
    auto s = kCase;
    s.insert({"unit_id", "make", "model", "model_year", "maneuver"});
    return s;
  }();
  static const std::set<std::string> kPerson = [] {
    auto s = kVehicle;
    s.insert({"role", "age", "sex", "restraint", "airbag", "sobriety"});
    return s;
  }();
  switch (scope) {
    case Scope::Case: return kCase;
    case Scope::Vehicle: return kVehicle;
    case Scope::Person: return kPerson;
  }
  return kCase;
}

std::vector<NarrativeTemplate> parse_templates(std::string_view text, const Lexicon& lexicon) {
  std::vector<NarrativeTemplate> blocks;
  std::string current;
  for (const auto& e : parse_key_value(text)) {
    if (blocks.empty() || e.section != current) {
      NarrativeTemplate block;
      if (e.section == "descriptive.case") {
        block = {Section::Descriptive, Scope::Case, {}};
      } else if (e.section == "descriptive.vehicle") {
        block = {Section::Descriptive, Scope::Vehicle, {}};
      } else if (e.section == "descriptive.person") {
        block = {Section::Descriptive, Scope::Person, {}};
      } else if (e.section == "outcome.case") {
        block = {Section::Outcome, Scope::Case, {}};
      } else {
        throw ParseError(e.line, "unknown template section '" + e.section + "'");
      }
      blocks.push_back(std::move(block));
      current = e.section;
    }
    auto& block = blocks.back();
    auto sentence = SentenceTemplate::parse(e.raw, e.line);
    for (const auto& slot : sentence.slots()) {
      if (!slot_names(block.scope).contains(slot)) {
        throw ParseError(e.line, "slot '" + slot + "' is not a field of scope '" + e.section + "'");
      }
      if (slot == "severity" && block.section != Section::Outcome) {
        throw ParseError(e.line, "severity may only be rendered in an outcome section");
      }
    }
    for (const auto& p : sentence.parts) {
      if (p.kind == SentenceTemplate::Part::Kind::Text && lexicon.contains_null_marker(p.text)) {
        throw ParseError(e.line, "template text contains a null marker");
      }
    }
    block.sentences.push_back(std::move(sentence));
  }
  return blocks;
}

std::vector<NarrativeTemplate> load_templates(const std::string& path, const Lexicon& lexicon) {
  return parse_templates(read_text_file(path), lexicon);
}

// ---------------------------------------------------------------------------
// render

namespace {

struct ScopeChain {
  const NormalizedRecord* inner = nullptr;
  const NormalizedRecord* middle = nullptr;
  const NormalizedRecord* outer = nullptr;
  const NormalizedRecord* outcome = nullptr;

  std::optional<std::string> resolve(const std::string& name) const {
    if (name == "extras") {
      auto list = inner->extras();
      if (list.empty()) return std::nullopt;
      std::string joined;
      for (std::size_t i = 0; i < list.size(); ++i) {
        if (i) joined += "; ";
        joined += list[i];
      }
      return joined;
    }
    if (name == "severity") return outcome->get(name);
    for (const auto* r : {inner, middle, outer}) {
      if (r == nullptr) continue;
      if (auto v = r->get(name)) return v;
    }
    return std::nullopt;
  }
};

std::optional<std::string> render_sentence(const SentenceTemplate& t, const ScopeChain& chain,
                                           const std::string& caseno) {
  using Kind = SentenceTemplate::Part::Kind;
  std::string out, group;
  bool in_group = false, group_ok = true;
  for (const auto& p : t.parts) {
    std::string& sink = in_group ? group : out;
    switch (p.kind) {
      case Kind::Text:
        sink += p.text;
        break;
      case Kind::Slot: {
        auto value = chain.resolve(p.text);
        if (!value) {
          if (!p.optional) {
            throw Error(ErrorKind::MissingRequiredSlot,
                        "MissingRequiredSlot(" + p.text + ", " + caseno + ")");
          }
          if (!in_group) return std::nullopt;
          group_ok = false;
        } else {
          sink += *value;
        }
        break;
      }
      case Kind::GroupBegin:
        in_group = true;
        group_ok = true;
        group.clear();
        break;
      case Kind::GroupEnd:
        if (group_ok) out += group;
        in_group = false;
        break;
    }
  }
  auto trimmed = std::string(trim(out));
  if (trimmed.empty()) return std::nullopt;
  return trimmed;
}

void append_sentence(std::string& text, const std::string& sentence) {
  if (!text.empty()) text.push_back(' ');
  text += sentence;
}

}  // namespace

NarrativePair render(const NormalizedCase& c, const std::vector<NarrativeTemplate>& templates) {
  NarrativePair pair;
  pair.caseno = c.caseno;
  pair.label = c.label;
  for (const auto& block : templates) {
    std::string& text = block.section == Section::Outcome ? pair.outcome : pair.descriptive;
    auto emit = [&](const ScopeChain& chain) {
      for (const auto& s : block.sentences) {
        if (auto line = render_sentence(s, chain, c.caseno)) append_sentence(text, *line);
      }
    };
    switch (block.scope) {
      case Scope::Case:
        emit({&c.scene, nullptr, nullptr, &c.outcome});
        break;
      case Scope::Vehicle:
        for (const auto& u : c.units) emit({&u.vehicle, &c.scene, nullptr, &c.outcome});
        break;
      case Scope::Person:
        for (const auto& u : c.units) {
          for (const auto& p : u.persons) emit({&p, &u.vehicle, &c.scene, &c.outcome});
        }
        break;
    }
  }
  return pair;
}

std::string narratives_to_jsonl(const std::vector<NarrativePair>& narratives) {
  std::string out;
  for (const auto& n : narratives) {
    nlohmann::ordered_json j;
    j["caseno"] = n.caseno;
    j["descriptive"] = n.descriptive;
    j["outcome"] = n.outcome;
    j["label"] = to_string(n.label);
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<NarrativePair> narratives_from_jsonl(std::string_view text) {
  std::vector<NarrativePair> out;
  std::size_t lineno = 0;
  for (const auto& line : split(text, '\n')) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      NarrativePair n;
      n.caseno = j.at("caseno").get<std::string>();
      n.descriptive = j.at("descriptive").get<std::string>();
      n.outcome = j.at("outcome").get<std::string>();
      auto label = parse_severity(j.at("label").get<std::string>());
      if (!label) throw std::invalid_argument("bad label");
      n.label = *label;
      out.push_back(std::move(n));
    } catch (const std::exception& e) {
      throw ParseError(lineno, e.what());
    }
  }
  return out;
}

}  // namespace crashxai
