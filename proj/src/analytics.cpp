#include "crashxai/analytics.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <json.hpp>

#include "crashxai/keyvalue.hpp"
#include "crashxai/util.hpp"

namespace crashxai {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view aspect_key(AspectCategory a) {
  switch (a) {
    case AspectCategory::Environmental: return "environmental";
    case AspectCategory::VehicleOccupant: return "vehicle_occupant";
    case AspectCategory::Behavioral: return "behavioral";
    case AspectCategory::Infrastructure: return "infrastructure";
    case AspectCategory::Unusual: return "unusual";
  }
  return "unusual";
}

std::string_view aspect_label(AspectCategory a) {
  switch (a) {
    case AspectCategory::Environmental: return "Environmental";
    case AspectCategory::VehicleOccupant: return "Vehicle and Occupant";
    case AspectCategory::Behavioral: return "Driver Behavioral";
    case AspectCategory::Infrastructure: return "Infrastructure";
    case AspectCategory::Unusual: return "Unusual/Standout";
  }
  return "";
}

std::optional<AspectCategory> parse_aspect(std::string_view key) {
  for (auto a : kAllAspects) {
    if (aspect_key(a) == key) return a;
  }
  return std::nullopt;
}

std::string_view aspect_color(AspectCategory a) {
  switch (a) {
    case AspectCategory::Environmental: return "#2ca02c";
    case AspectCategory::VehicleOccupant: return "#1f77b4";
    case AspectCategory::Behavioral: return "#d62728";
    case AspectCategory::Infrastructure: return "#ff7f0e";
    case AspectCategory::Unusual: return "#9467bd";
  }
  return "#999999";
}

namespace {

void sort_terms(std::vector<FactorTerm>& terms) {
  std::stable_sort(terms.begin(), terms.end(),
                   [](const FactorTerm& a, const FactorTerm& b) { return a.score > b.score; });
}

std::optional<CategorySummary> parse_category(const json& j) {
  if (!j.is_object()) return std::nullopt;
  CategorySummary c;
  if (j.contains("summary")) {
    if (!j["summary"].is_string()) return std::nullopt;
    c.summary = j["summary"].get<std::string>();
  }
  if (!j.contains("terms") || !j["terms"].is_array()) return std::nullopt;
  for (const auto& t : j["terms"]) {
    FactorTerm ft;
    if (t.is_object() && t.contains("term") && t["term"].is_string() && t.contains("score") &&
        t["score"].is_number()) {
      ft.term = t["term"].get<std::string>();
      ft.score = t["score"].get<double>();
    } else if (t.is_array() && t.size() == 2 && t[0].is_string() && t[1].is_number()) {
      ft.term = t[0].get<std::string>();
      ft.score = t[1].get<double>();
    } else {
      return std::nullopt;
    }
    if (ft.score > 0.0 && !ft.term.empty()) c.terms.push_back(std::move(ft));
  }
  sort_terms(c.terms);
  return c;
}

ordered_json category_to_json(const CategorySummary& c) {
  ordered_json terms = ordered_json::array();
  for (const auto& t : c.terms) {
    ordered_json o;
    o["term"] = t.term;
    o["score"] = t.score;
    terms.push_back(o);
  }
  ordered_json o;
  o["summary"] = c.summary;
  o["terms"] = terms;
  return o;
}

}  // namespace

std::optional<FactorSummary> parse_factor_json(std::string_view completion) {
  const auto open = completion.find('{');
  const auto close = completion.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    return std::nullopt;
  }
  const auto j = json::parse(completion.substr(open, close - open + 1), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  FactorSummary s;
  s.source = FactorSource::Llm;
  for (auto a : kAllAspects) {
    const std::string key(aspect_key(a));
    if (!j.contains(key)) return std::nullopt;
    auto c = parse_category(j[key]);
    if (!c) return std::nullopt;
    s[a] = std::move(*c);
  }
  return s;
}

std::string factor_summary_to_json(const FactorSummary& s, int indent) {
  ordered_json j;
  j["caseno"] = s.caseno;
  j["source"] = s.source == FactorSource::Llm ? "llm" : "rules";
  for (auto a : kAllAspects) j[std::string(aspect_key(a))] = category_to_json(s[a]);
  return j.dump(indent) + "\n";
}

FactorSummary factor_summary_from_json(std::string_view text) {
  auto parsed = parse_factor_json(text);
  if (!parsed) throw Error(ErrorKind::Parse, "not a factor summary document");
  const auto j = json::parse(text);
  parsed->caseno = j.value("caseno", "");
  parsed->source = j.value("source", "llm") == "rules" ? FactorSource::Rules : FactorSource::Llm;
  return *parsed;
}

// ---------------------------------------------------------------------------
// offline categorizer

std::string clean_term(std::string_view word) {
  constexpr std::string_view kEdge = ".,;:!?()[]{}\"'";
  while (!word.empty() && kEdge.find(word.front()) != std::string_view::npos) word.remove_prefix(1);
  while (!word.empty() && kEdge.find(word.back()) != std::string_view::npos) word.remove_suffix(1);
  return std::string(word);
}

CategoryLexicon CategoryLexicon::parse(std::string_view text) {
  CategoryLexicon lex;
  for (const auto& line : parse_key_value(text)) {
    std::optional<AspectCategory> aspect;
    if (line.section == "ignore") {
      aspect = std::nullopt;
    } else {
      aspect = parse_aspect(line.section);
      if (!aspect || *aspect == AspectCategory::Unusual) {
        throw Error(ErrorKind::Validation, "line " + std::to_string(line.line) +
                                               ": unknown category section '" + line.section + "'");
      }
    }
    Entry e{aspect, {}, std::nullopt};
    if (line.raw.starts_with("re:")) {
      try {
        e.pattern = std::regex(line.raw.substr(3), std::regex::ECMAScript | std::regex::icase);
      } catch (const std::regex_error& err) {
        throw Error(ErrorKind::Validation,
                    "line " + std::to_string(line.line) + ": bad pattern: " + err.what());
      }
    } else {
      e.literal = to_lower(line.raw);
    }
    lex.entries_.push_back(std::move(e));
  }
  return lex;
}

CategoryLexicon CategoryLexicon::load(const std::string& path) {
  return parse(read_text_file(path));
}

std::optional<AspectCategory> CategoryLexicon::classify(std::string_view word, bool* ignored) const {
  if (ignored) *ignored = false;
  const std::string cleaned = clean_term(word);
  const std::string lower = to_lower(cleaned);
  for (const auto& e : entries_) {
    const bool hit = e.pattern ? std::regex_search(cleaned, *e.pattern) : e.literal == lower;
    if (!hit) continue;
    if (!e.aspect && ignored) *ignored = true;
    return e.aspect;
  }
  return std::nullopt;
}

namespace {

std::string join_terms(const std::vector<FactorTerm>& terms) {
  std::string out;
  for (const auto& t : terms) {
    if (!out.empty()) out += ", ";
    out += t.term;
  }
  return out;
}

}  // namespace

FactorSummary rule_based_factors(std::string caseno, const std::vector<WordAttribution>& words,
                                 const CategoryLexicon& lexicon) {
  FactorSummary s;
  s.caseno = std::move(caseno);
  s.source = FactorSource::Rules;
  for (const auto& w : words) {
    if (!(w.score > 0.0)) continue;
    const std::string term = clean_term(w.word);
    if (term.empty()) continue;
    bool ignored = false;
    const auto aspect = lexicon.classify(term, &ignored);
    if (ignored) continue;
    auto& terms = s[aspect.value_or(AspectCategory::Unusual)].terms;
    auto it = std::find_if(terms.begin(), terms.end(), [&](const auto& t) { return t.term == term; });
    if (it == terms.end()) {
      terms.push_back({term, w.score, w.begin});
    } else {
      it->score = std::max(it->score, w.score);
    }
  }
  for (auto a : kAllAspects) {
    auto& c = s[a];
    sort_terms(c.terms);
    const std::string label = to_lower(aspect_label(a));
    c.summary = c.terms.empty() ? "No high-attribution " + label + " terms."
                                : "High-attribution " + label + " terms: " + join_terms(c.terms) + ".";
  }
  return s;
}

// ---------------------------------------------------------------------------
// LLM summarizer

std::string FactorPromptConfig::default_system_prompt() {
  return "You are a traffic safety analyst. The user gives you a crash narrative in which every "
         "word is followed by its attribution score in square brackets, for example "
         "\"dusk[2.28]\". Higher scores mean the word mattered more to a severity model.\n\n"
         "Sort the high-scoring words and phrases into five categories:\n"
         "- environmental: weather, lighting, road surface, date and time, location\n"
         "- vehicle_occupant: vehicle make, model and year, occupants, restraints, airbags\n"
         "- behavioral: driver actions such as speeding, intoxication, maneuvers\n"
         "- infrastructure: road design, lanes, shoulders, speed limit, traffic volume, traffic "
         "control\n"
         "- unusual: anything else with an unexpectedly high score\n\n"
         "Reply with a single JSON object with exactly these five keys. Each value is an object "
         "{\"summary\": \"<one or two sentences>\", \"terms\": [{\"term\": \"<word or phrase>\", "
         "\"score\": <number>}]}, terms sorted by descending score. Use the scores from the "
         "narrative and include only terms that appear in it.";
}

namespace {

void fill_positions(FactorSummary& s, std::string_view narrative) {
  for (auto& c : s.categories) {
    for (auto& t : c.terms) {
      const auto pos = narrative.find(t.term);
      if (pos != std::string_view::npos) t.position = pos;
    }
  }
}

}  // namespace

std::vector<WordAttribution> words_from_annotated(std::string_view annotated) {
  const std::string plain = strip_annotations(annotated);
  std::vector<WordAttribution> out;
  std::size_t cursor = 0;
  for (const auto& [word, score] : parse_annotations(annotated)) {
    const auto pos = plain.find(word, cursor);
    WordAttribution w{word, pos == std::string::npos ? cursor : pos, 0, score, {}};
    w.end = w.begin + word.size();
    if (pos != std::string::npos) cursor = w.end;
    out.push_back(std::move(w));
  }
  return out;
}

FactorSummary summarize_factors(std::string caseno, std::string_view annotated,
                                const ChatClient& client, const FactorPromptConfig& cfg,
                                const CategoryLexicon& fallback) {
  if (trim(annotated).empty()) {
    FactorSummary empty;
    empty.caseno = std::move(caseno);
    return empty;
  }
  const std::string plain = strip_annotations(annotated);
  ChatRequest req{cfg.system_prompt, std::string(annotated), cfg.temperature, cfg.model_name};
  std::string reply = complete_with_retry(client, req, cfg.retry);
  auto parsed = parse_factor_json(reply);
  if (!parsed) {
    req.user = std::string(annotated) + "\n\n" + cfg.repair_instruction;
    reply = complete_with_retry(client, req, cfg.retry);
    parsed = parse_factor_json(reply);
  }
  if (!parsed) return rule_based_factors(std::move(caseno), words_from_annotated(annotated), fallback);
  parsed->caseno = std::move(caseno);
  fill_positions(*parsed, plain);
  return *parsed;
}

std::map<AspectCategory, std::vector<FactorTerm>> extract_top_factors(const FactorSummary& s,
                                                                      std::size_t k) {
  std::map<AspectCategory, std::vector<FactorTerm>> out;
  for (auto a : kAllAspects) {
    if (a == AspectCategory::Unusual) continue;
    auto terms = s[a].terms;
    std::stable_sort(terms.begin(), terms.end(), [](const FactorTerm& x, const FactorTerm& y) {
      if (x.score != y.score) return x.score > y.score;
      return x.position < y.position;
    });
    if (terms.size() > k) terms.resize(k);
    out[a] = std::move(terms);
  }
  return out;
}

// ---------------------------------------------------------------------------
// grouping

GroupingRules GroupingRules::parse(std::string_view text) {
  GroupingRules rules;
  std::size_t line_no = 0;
  for (const auto& raw_line : split(text, '\n')) {
    ++line_no;
    const std::string_view line = trim(raw_line);
    if (line.empty() || line.front() == '#') continue;
    const auto arrow = line.find("=>");
    if (arrow == std::string_view::npos) {
      throw Error(ErrorKind::Validation,
                  "line " + std::to_string(line_no) + ": expected 'pattern => canonical name'");
    }
    Rule r;
    r.source = std::string(trim(line.substr(0, arrow)));
    r.canonical = std::string(trim(line.substr(arrow + 2)));
    if (r.source.empty() || r.canonical.empty()) {
      throw Error(ErrorKind::Validation, "line " + std::to_string(line_no) + ": empty pattern or name");
    }
    try {
      r.pattern = std::regex(r.source, std::regex::ECMAScript | std::regex::icase);
    } catch (const std::regex_error& e) {
      throw Error(ErrorKind::Validation,
                  "line " + std::to_string(line_no) + ": bad pattern '" + r.source + "': " + e.what());
    }
    rules.rules_.push_back(std::move(r));
  }
  for (const auto& r : rules.rules_) {
    const std::string again = rules.apply(r.canonical);
    if (again != r.canonical) {
      throw Error(ErrorKind::Validation, "grouping is not idempotent: '" + r.canonical +
                                             "' regroups to '" + again + "'");
    }
  }
  return rules;
}

GroupingRules GroupingRules::load(const std::string& path) { return parse(read_text_file(path)); }

std::string GroupingRules::apply(std::string_view factor) const {
  const std::string s(factor);
  for (const auto& r : rules_) {
    if (std::regex_search(s, r.pattern)) return r.canonical;
  }
  return s;
}

std::vector<Factor> semantic_group(const std::vector<Factor>& factors, const GroupingRules& rules) {
  std::vector<Factor> out;
  out.reserve(factors.size());
  for (const auto& f : factors) out.push_back({f.aspect, rules.apply(f.name)});
  return out;
}

std::vector<Factor> to_factors(const std::map<AspectCategory, std::vector<FactorTerm>>& top) {
  std::vector<Factor> out;
  for (const auto& [aspect, terms] : top) {
    for (const auto& t : terms) out.push_back({aspect, t.term});
  }
  return out;
}

CooccurrenceGraph cooccurrence(const std::vector<std::vector<Factor>>& cases) {
  std::map<std::pair<Factor, Factor>, long long> links;
  for (const auto& c : cases) {
    const std::set<Factor> unique(c.begin(), c.end());
    for (auto i = unique.begin(); i != unique.end(); ++i) {
      for (auto j = std::next(i); j != unique.end(); ++j) {
        if (i->aspect != j->aspect) ++links[{*i, *j}];
      }
    }
  }
  CooccurrenceGraph g;
  std::map<Factor, long long> totals;
  for (const auto& [pair, count] : links) {
    g.links.push_back({pair.first, pair.second, count});
    totals[pair.first] += count;
    totals[pair.second] += count;
  }
  for (const auto& [f, count] : totals) g.nodes.push_back({f, count});
  return g;
}

// ---------------------------------------------------------------------------
// exports

std::string html_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

namespace {

std::size_t node_index(const CooccurrenceGraph& g, const Factor& f) {
  auto it = std::lower_bound(g.nodes.begin(), g.nodes.end(), f,
                             [](const CooccurrenceNode& n, const Factor& x) { return n.factor < x; });
  return static_cast<std::size_t>(it - g.nodes.begin());
}

}  // namespace

std::string sankey_json(const CooccurrenceGraph& g) {
  ordered_json j;
  ordered_json aspects = ordered_json::array();
  for (auto a : kAllAspects) {
    ordered_json o;
    o["key"] = std::string(aspect_key(a));
    o["label"] = std::string(aspect_label(a));
    o["color"] = std::string(aspect_color(a));
    aspects.push_back(o);
  }
  j["aspects"] = aspects;
  ordered_json nodes = ordered_json::array();
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    ordered_json o;
    o["id"] = i;
    o["name"] = g.nodes[i].factor.name;
    o["aspect"] = std::string(aspect_key(g.nodes[i].factor.aspect));
    o["count"] = g.nodes[i].count;
    nodes.push_back(o);
  }
  j["nodes"] = nodes;
  ordered_json links = ordered_json::array();
  for (const auto& l : g.links) {
    ordered_json o;
    o["source"] = node_index(g, l.source);
    o["target"] = node_index(g, l.target);
    o["count"] = l.count;
    links.push_back(o);
  }
  j["links"] = links;
  return j.dump(1) + "\n";
}

CooccurrenceGraph parse_sankey_json(std::string_view text) {
  const auto j = json::parse(text, nullptr, false);
  auto fail = [](const std::string& why) { return Error(ErrorKind::Validation, "sankey: " + why); };
  if (j.is_discarded() || !j.is_object()) throw fail("not a JSON object");
  if (!j.contains("nodes") || !j["nodes"].is_array() || !j.contains("links") ||
      !j["links"].is_array()) {
    throw fail("missing nodes or links array");
  }
  CooccurrenceGraph g;
  try {
    for (std::size_t i = 0; i < j["nodes"].size(); ++i) {
      const auto& n = j["nodes"][i];
      if (n.at("id").get<std::size_t>() != i) throw fail("node ids must be 0..n-1 in order");
      auto aspect = parse_aspect(n.at("aspect").get<std::string>());
      if (!aspect) throw fail("unknown aspect");
      g.nodes.push_back({{*aspect, n.at("name").get<std::string>()}, n.at("count").get<long long>()});
    }
    std::vector<long long> incident(g.nodes.size(), 0);
    for (const auto& l : j["links"]) {
      const auto s = l.at("source").get<std::size_t>();
      const auto t = l.at("target").get<std::size_t>();
      const auto c = l.at("count").get<long long>();
      if (s >= g.nodes.size() || t >= g.nodes.size()) throw fail("link refers to a missing node");
      if (c < 1) throw fail("link count below 1");
      if (g.nodes[s].factor.aspect == g.nodes[t].factor.aspect) throw fail("same-aspect link");
      incident[s] += c;
      incident[t] += c;
      g.links.push_back({g.nodes[s].factor, g.nodes[t].factor, c});
    }
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      if (g.nodes[i].count != incident[i]) throw fail("node total differs from its link sum");
    }
  } catch (const json::exception& e) {
    throw fail(e.what());
  }
  return g;
}

std::string sankey_html(const CooccurrenceGraph& g) {
  constexpr double kColumnGap = 260.0;
  constexpr double kNodeWidth = 14.0;
  constexpr double kGap = 10.0;
  constexpr double kTop = 40.0;
  constexpr double kLeft = 20.0;
  constexpr double kScaleHeight = 480.0;

  std::vector<AspectCategory> columns;
  for (auto a : kAllAspects) {
    if (std::any_of(g.nodes.begin(), g.nodes.end(), [&](const auto& n) { return n.factor.aspect == a; })) {
      columns.push_back(a);
    }
  }
  std::map<AspectCategory, long long> column_total;
  for (const auto& n : g.nodes) column_total[n.factor.aspect] += n.count;
  long long biggest = 1;
  for (const auto& [a, t] : column_total) biggest = std::max(biggest, t);
  const double unit = kScaleHeight / static_cast<double>(biggest);

  struct Box {
    double x, y, h, in_offset = 0, out_offset = 0;
  };
  std::vector<Box> boxes(g.nodes.size());
  double height = kTop;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    double y = kTop;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      if (g.nodes[i].factor.aspect != columns[c]) continue;
      const double h = static_cast<double>(g.nodes[i].count) * unit;
      boxes[i] = {kLeft + static_cast<double>(c) * kColumnGap, y, h};
      y += h + kGap;
    }
    height = std::max(height, y);
  }
  const double width = kLeft * 2 + static_cast<double>(std::max<std::size_t>(columns.size(), 1) - 1) * kColumnGap + 200.0;

  auto num = [](double v) { return format_fixed(v, 2); };
  std::string svg;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    svg += "<text class=\"col\" x=\"" + num(kLeft + static_cast<double>(c) * kColumnGap) + "\" y=\"20\">" +
           html_escape(aspect_label(columns[c])) + "</text>\n";
  }
  for (const auto& l : g.links) {
    Box& s = boxes[node_index(g, l.source)];
    Box& t = boxes[node_index(g, l.target)];
    const double w = static_cast<double>(l.count) * unit;
    const double x0 = s.x + kNodeWidth;
    const double y0 = s.y + s.out_offset + w / 2;
    const double x1 = t.x;
    const double y1 = t.y + t.in_offset + w / 2;
    s.out_offset += w;
    t.in_offset += w;
    const double mid = (x0 + x1) / 2;
    svg += "<path d=\"M" + num(x0) + "," + num(y0) + " C" + num(mid) + "," + num(y0) + " " +
           num(mid) + "," + num(y1) + " " + num(x1) + "," + num(y1) + "\" stroke=\"" +
           std::string(aspect_color(l.source.aspect)) + "\" stroke-width=\"" + num(std::max(w, 1.0)) +
           "\" fill=\"none\" stroke-opacity=\"0.35\"><title>" + html_escape(l.source.name) + " - " +
           html_escape(l.target.name) + ": " + std::to_string(l.count) + "</title></path>\n";
  }
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& n = g.nodes[i];
    const auto& b = boxes[i];
    svg += "<rect x=\"" + num(b.x) + "\" y=\"" + num(b.y) + "\" width=\"" + num(kNodeWidth) +
           "\" height=\"" + num(std::max(b.h, 1.0)) + "\" fill=\"" +
           std::string(aspect_color(n.factor.aspect)) + "\"/>\n";
    svg += "<text x=\"" + num(b.x + kNodeWidth + 4) + "\" y=\"" + num(b.y + b.h / 2 + 4) + "\">" +
           html_escape(n.factor.name) + " (" + std::to_string(n.count) + ")</text>\n";
  }

  std::string html =
      "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n"
      "<title>Factor co-occurrence</title>\n<style>\n"
      "body { font-family: sans-serif; margin: 1em; }\n"
      "text { font-size: 12px; }\n"
      "text.col { font-weight: bold; font-size: 13px; }\n"
      "</style>\n</head>\n<body>\n<h1>Factor co-occurrence</h1>\n";
  if (g.links.empty()) html += "<p>No co-occurring factor pairs.</p>\n";
  html += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" +
          num(height + kGap) + "\">\n" + svg + "</svg>\n</body>\n</html>\n";
  return html;
}

std::string heatmap_html(std::string_view caseno, std::string_view annotated, double threshold_hi) {
  std::string body;
  std::size_t i = 0;
  while (i < annotated.size()) {
    if (std::isspace(static_cast<unsigned char>(annotated[i]))) {
      body.push_back(annotated[i] == '\n' ? ' ' : annotated[i]);
      ++i;
      continue;
    }
    std::size_t end = i;
    while (end < annotated.size() && !std::isspace(static_cast<unsigned char>(annotated[end]))) ++end;
    const std::string_view token = annotated.substr(i, end - i);
    const auto parsed = parse_annotations(token);
    if (parsed.empty()) {
      body += html_escape(token);
    } else {
      const auto& [word, score] = parsed.front();
      const std::string cls = score >= threshold_hi ? "hi" : score > 0.0 ? "mid" : "";
      const std::string inner =
          html_escape(word) + "<sup>[" + format_fixed(score, 2) + "]</sup>";
      body += cls.empty() ? inner : "<span class=\"" + cls + "\">" + inner + "</span>";
    }
    i = end;
  }
  return "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>Attribution " +
         html_escape(caseno) +
         "</title>\n<style>\n"
         "body { font-family: serif; max-width: 50em; margin: 2em auto; line-height: 1.8; }\n"
         "sup { color: #777; font-size: 0.7em; }\n"
         ".hi { color: #c00000; font-weight: bold; }\n"
         ".mid { color: #1a7f1a; }\n"
         "</style>\n</head>\n<body>\n<h1>Case " +
         html_escape(caseno) + "</h1>\n<p>Red: score &ge; " + format_fixed(threshold_hi, 2) +
         ". Green: 0 &lt; score &lt; " + format_fixed(threshold_hi, 2) + ".</p>\n<p>" + body +
         "</p>\n</body>\n</html>\n";
}

}  // namespace crashxai
