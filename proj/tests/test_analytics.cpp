#include <string>

#include "doctest.h"
#include "oracles.hpp"

#include "crashxai/analytics.hpp"

using namespace crashxai;

namespace {

const std::string kData = CRASHXAI_TEST_DATA_DIR;
const std::string kFixtures = std::string(CRASHXAI_TEST_DIR) + "/fixtures";

bool has_term(const CategorySummary& c, const std::string& term, double score) {
  for (const auto& t : c.terms) {
    if (t.term == term && std::abs(t.score - score) < 1e-12) return true;
  }
  return false;
}

FactorPromptConfig fast_prompt() {
  FactorPromptConfig cfg;
  cfg.retry.base_delay = std::chrono::milliseconds(1);
  return cfg;
}

void check_same(const CooccurrenceGraph& a, const CooccurrenceGraph& b) {
  REQUIRE(a.nodes.size() == b.nodes.size());
  REQUIRE(a.links.size() == b.links.size());
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    CHECK(a.nodes[i].factor == b.nodes[i].factor);
    CHECK(a.nodes[i].count == b.nodes[i].count);
  }
  for (std::size_t i = 0; i < a.links.size(); ++i) {
    CHECK(a.links[i].source == b.links[i].source);
    CHECK(a.links[i].target == b.links[i].target);
    CHECK(a.links[i].count == b.links[i].count);
  }
}

}  // namespace

TEST_CASE("aspect keys") {
  for (auto a : kAllAspects) CHECK(parse_aspect(aspect_key(a)) == a);
  CHECK(aspect_key(AspectCategory::VehicleOccupant) == "vehicle_occupant");
  CHECK_FALSE(parse_aspect("weather"));
}

TEST_CASE("factor JSON inside prose and a code fence") {
  const auto s = parse_factor_json(read_text_file(kFixtures + "/chelan_factors.json"));
  REQUIRE(s);
  const auto& env = (*s)[AspectCategory::Environmental];
  CHECK(has_term(env, "2022", 4.28));
  CHECK(has_term(env, "Chelan", 3.39));
  CHECK(has_term(env, "dusk", 2.28));
  CHECK(env.terms.front().term == "2022");
  CHECK(s->source == FactorSource::Llm);
  const auto back = factor_summary_from_json(factor_summary_to_json(*s));
  CHECK(back[AspectCategory::Unusual].terms.size() == 2);
  CHECK(factor_summary_to_json(*s, -1).find('\n') == factor_summary_to_json(*s, -1).size() - 1);
}

TEST_CASE("summarizer uses the model reply when it parses") {
  const std::string fixture = read_text_file(kFixtures + "/chelan_factors.json");
  int calls = 0;
  StubChatClient client([&](const ChatRequest&) {
    ++calls;
    return fixture;
  });
  const auto s = summarize_factors("E1", "On[1.92] June[1.96] dusk[2.28]", client, fast_prompt(),
                                   CategoryLexicon::load(kData + "/categories.txt"));
  CHECK(calls == 1);
  CHECK(s.caseno == "E1");
  CHECK(s.source == FactorSource::Llm);
}

TEST_CASE("missing category triggers one repair and then the rule fallback") {
  std::string broken = read_text_file(kFixtures + "/chelan_factors.json");
  broken.replace(broken.find("\"unusual\""), 9, "\"other\"");
  std::vector<std::string> users;
  StubChatClient client([&](const ChatRequest& r) {
    users.push_back(r.user);
    return broken;
  });
  const std::string annotated = "It was dusk[2.28] at milepost[3.10] 22.4.[0.50]";
  const auto s = summarize_factors("E1", annotated, client, fast_prompt(),
                                   CategoryLexicon::load(kData + "/categories.txt"));
  REQUIRE(users.size() == 2);
  CHECK(users[0] == annotated);
  CHECK(users[1].find(fast_prompt().repair_instruction) != std::string::npos);
  CHECK(s.source == FactorSource::Rules);
  CHECK(has_term(s[AspectCategory::Environmental], "dusk", 2.28));
}

TEST_CASE("rule-based categorizer on the bundled lexicon") {
  const auto lex = CategoryLexicon::load(kData + "/categories.txt");
  CHECK(lex.classify("dusk") == AspectCategory::Environmental);
  CHECK(lex.classify("intoxication") == AspectCategory::Behavioral);
  CHECK(lex.classify("Dusk.") == AspectCategory::Environmental);
  CHECK(lex.classify("2005") == AspectCategory::VehicleOccupant);
  CHECK(lex.classify("4,800") == AspectCategory::Infrastructure);
  CHECK_FALSE(lex.classify("milepost"));
  bool ignored = false;
  CHECK_FALSE(lex.classify("the", &ignored));
  CHECK(ignored);

  const std::vector<WordAttribution> words{{"dusk.", 0, 5, 2.28, {}},
                                           {"milepost", 6, 14, 4.0, {}},
                                           {"the", 15, 18, 5.0, {}},
                                           {"dusk", 19, 23, 1.0, {}},
                                           {"intoxication", 24, 36, 0.0, {}}};
  const auto s = rule_based_factors("R1", words, lex);
  CHECK(s[AspectCategory::Unusual].terms.size() == 1);
  CHECK(s[AspectCategory::Unusual].terms[0].term == "milepost");
  REQUIRE(s[AspectCategory::Environmental].terms.size() == 1);
  CHECK(s[AspectCategory::Environmental].terms[0].score == 2.28);
  CHECK(s[AspectCategory::Environmental].terms[0].position == 0);
  CHECK(s[AspectCategory::Behavioral].terms.empty());
}

TEST_CASE("category lexicon rejects unknown sections and bad patterns") {
  CHECK_THROWS_AS(CategoryLexicon::parse("[weather]\nrain\n"), Error);
  CHECK_THROWS_AS(CategoryLexicon::parse("[unusual]\nrain\n"), Error);
  CHECK_THROWS_AS(CategoryLexicon::parse("[behavioral]\nre:(\n"), Error);
}

TEST_CASE("top-k breaks score ties by position") {
  FactorSummary s;
  auto& env = s[AspectCategory::Environmental].terms;
  for (int i = 0; i < 7; ++i) env.push_back({"t" + std::to_string(i), i < 3 ? 3.0 : 1.0, 100u - i});
  s[AspectCategory::Unusual].terms.push_back({"odd", 9.0, 0});
  const auto a = extract_top_factors(s, 5);
  const auto b = extract_top_factors(s, 5);
  CHECK(a.count(AspectCategory::Unusual) == 0);
  const auto& top = a.at(AspectCategory::Environmental);
  REQUIRE(top.size() == 5);
  CHECK(top[0].term == "t2");
  CHECK(top[3].term == "t6");
  CHECK(top[4].term == "t5");
  CHECK(b.at(AspectCategory::Environmental)[4].term == "t5");
}

TEST_CASE("bundled grouping rules") {
  const auto rules = GroupingRules::load(kData + "/grouping_rules.txt");
  CHECK(rules.apply("8:00 PM") == "time of day");
  CHECK(rules.apply("1:00 PM") == "time of day");
  CHECK(rules.apply("AADT 4,800") == "traffic volume");
  CHECK(rules.apply("4,800") == "traffic volume");
  CHECK(rules.apply("dusk") == "lighting");
  CHECK(rules.apply("Chelan") == "Chelan");
  const auto grouped = semantic_group({{AspectCategory::Environmental, "8:00 PM"},
                                       {AspectCategory::Environmental, "1:00 PM"}},
                                      rules);
  CHECK(grouped[0] == grouped[1]);
}

TEST_CASE("grouping rules must be idempotent and well formed") {
  CHECK_THROWS_AS(GroupingRules::parse("dusk => dark\ndark => night\n"), Error);
  CHECK_THROWS_AS(GroupingRules::parse("no arrow here\n"), Error);
  CHECK_THROWS_AS(GroupingRules::parse("([ => x\n"), Error);
  CHECK(GroupingRules::parse("# comment\n\nDUSK => lighting\n").apply("dusk") == "lighting");
}

TEST_CASE("co-occurrence counts each cross-aspect pair once per case") {
  using A = AspectCategory;
  const Factor dusk{A::Environmental, "lighting"}, dark{A::Environmental, "dark"},
      belt{A::VehicleOccupant, "restraint use"}, speed{A::Behavioral, "speed"};
  const auto g = cooccurrence({{dusk, belt, belt, dark}, {dusk, belt, speed}, {dusk}});
  // links: (dark, belt)=1, (lighting, belt)=2, (belt, speed)=1, (lighting, speed)=1
  CHECK(g.links.size() == 4);
  long long lighting_belt = 0;
  for (const auto& l : g.links) {
    CHECK(l.source.aspect != l.target.aspect);
    CHECK(l.source < l.target);
    if ((l.source == dusk && l.target == belt) || (l.source == belt && l.target == dusk)) {
      lighting_belt = l.count;
    }
  }
  CHECK(lighting_belt == 2);
  for (const auto& n : g.nodes) {
    if (n.factor == belt) CHECK(n.count == 4);
    if (n.factor == dusk) CHECK(n.count == 3);
  }
}

TEST_CASE("co-occurrence agrees with the brute-force oracle") {
  Rng rng(17);
  const std::vector<std::string> names{"a", "b", "c", "d"};
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<Factor>> cases(1 + rng.index(30));
    for (auto& c : cases) {
      for (std::size_t k = 0, n = rng.index(8); k < n; ++k) {
        c.push_back({kAllAspects[rng.index(5)], names[rng.index(names.size())]});
      }
    }
    const auto g = cooccurrence(cases);
    const auto want = oracle::cooccurrence(cases);
    REQUIRE(g.links.size() == want.links.size());
    for (const auto& l : g.links) CHECK(want.links.at({l.source, l.target}) == l.count);
    REQUIRE(g.nodes.size() == want.nodes.size());
    for (const auto& n : g.nodes) CHECK(want.nodes.at(n.factor) == n.count);
  }
}

TEST_CASE("Sankey JSON round-trips and is validated") {
  using A = AspectCategory;
  const auto g = cooccurrence({{{A::Environmental, "lighting"}, {A::Behavioral, "speed"},
                                {A::Infrastructure, "lane <configuration>"}},
                               {{A::Environmental, "lighting"}, {A::Behavioral, "speed"}}});
  const auto text = sankey_json(g);
  check_same(parse_sankey_json(text), g);
  auto j = nlohmann::json::parse(text);
  j["nodes"][0]["count"] = 99;
  CHECK_THROWS_AS(parse_sankey_json(j.dump()), Error);
  j = nlohmann::json::parse(text);
  j["links"][0]["target"] = 42;
  CHECK_THROWS_AS(parse_sankey_json(j.dump()), Error);
  CHECK_THROWS_AS(parse_sankey_json("[]"), Error);
  const auto html = sankey_html(g);
  CHECK(html.find("<svg") != std::string::npos);
  CHECK(html.find("lane &lt;configuration&gt;") != std::string::npos);
}

TEST_CASE("heatmap colours by threshold") {
  const auto html = heatmap_html("E1", "On[1.92] June[1.96] 29,[2.66] 2022,[4.28] at dusk[2.28] <b>[0.00]", 3.0);
  CHECK(html.find("<span class=\"hi\">2022,<sup>[4.28]</sup></span>") != std::string::npos);
  CHECK(html.find("<span class=\"mid\">dusk<sup>[2.28]</sup></span>") != std::string::npos);
  CHECK(html.find("&lt;b&gt;<sup>[0.00]</sup>") != std::string::npos);
  CHECK(html.find(" at ") != std::string::npos);
}

TEST_CASE("annotated words carry positions in the stripped text") {
  const auto words = words_from_annotated("It was dusk[2.28] at milepost[3.10] 22.4.");
  REQUIRE(words.size() == 2);
  CHECK(words[0].word == "dusk");
  CHECK(words[0].begin == 7);
  CHECK(words[1].begin == 15);
  CHECK(words[1].score == doctest::Approx(3.10));
}
