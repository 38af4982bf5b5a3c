#include <string>

#include <json.hpp>

#include "doctest.h"

#include "crashxai/evalharness.hpp"
#include "crashxai/util.hpp"

using namespace crashxai;

namespace {

const std::string kGolden = std::string(CRASHXAI_TEST_DIR) + "/golden";
const std::string kNarrative =
    "On June 29, 2022, at 8:00 PM, a traffic accident occurred on Alternate Route 097ARi in "
    "Chelan, Washington.";

PromptStrategy few_shot() {
  return {StrategyKind::FewShot,
          {{"A severe crash exemplar.", Severity::SeriousOrFatal},
           {"A minor crash exemplar.", Severity::NoApparentOrMinor}}};
}

Prediction pred(Severity gold, std::optional<Severity> label) {
  Prediction p;
  p.gold = gold;
  p.label = label;
  p.status = label ? ParseStatus::Exact : ParseStatus::Failed;
  return p;
}

constexpr auto M = Severity::NoApparentOrMinor;
constexpr auto S = Severity::SeriousOrFatal;

}  // namespace

TEST_CASE("prompts match the golden snapshots") {
  CHECK(render_prompt(build_prompt({StrategyKind::ZeroShot, {}}, kNarrative)) ==
        read_text_file(kGolden + "/prompt_zs.txt"));
  CHECK(render_prompt(build_prompt({StrategyKind::ZeroShotCoT, {}}, kNarrative)) ==
        read_text_file(kGolden + "/prompt_zs_cot.txt"));
  CHECK(render_prompt(build_prompt(few_shot(), kNarrative)) == read_text_file(kGolden + "/prompt_fs.txt"));
}

TEST_CASE("prompt structure") {
  const auto zs = build_prompt({StrategyKind::ZeroShot, {}}, kNarrative);
  CHECK(zs.system == kEngineerSystemPrompt);
  CHECK(render_prompt(zs).rfind("You are a professional road safety engineer.", 0) == 0);
  CHECK(zs.user.substr(zs.user.size() - kNarrative.size()) == kNarrative);
  const auto cot = build_prompt({StrategyKind::ZeroShotCoT, {}}, kNarrative);
  CHECK(cot.user.find("careful reasoning first") != std::string::npos);
  const auto fs = build_prompt(few_shot(), kNarrative);
  CHECK(fs.user.find("A minor crash exemplar.") < fs.user.find("A severe crash exemplar."));
  CHECK_THROWS_AS(build_prompt({StrategyKind::FewShot, {}}, kNarrative), Error);
  CHECK_THROWS_AS(build_prompt({StrategyKind::FewShot, {{"a", S}, {"b", S}}}, kNarrative), Error);
}

TEST_CASE("strategy names") {
  CHECK(parse_strategy("zs-cot") == StrategyKind::ZeroShotCoT);
  CHECK(to_string(StrategyKind::FewShot) == "fs");
  CHECK_FALSE(parse_strategy("cot"));
}

TEST_CASE("label parsing tiers") {
  auto p = parse_label("Serious injury or fatal accident", StrategyKind::ZeroShot);
  CHECK(p.label == S);
  CHECK(p.status == ParseStatus::Exact);
  p = parse_label("  no APPARENT or minor injury.", StrategyKind::ZeroShot);
  CHECK(p.label == M);
  CHECK(p.status == ParseStatus::Exact);
  p = parse_label("This looks severe.", StrategyKind::ZeroShot);
  CHECK(p.label == S);
  CHECK(p.status == ParseStatus::Fuzzy);
  p = parse_label("I cannot tell.", StrategyKind::ZeroShot);
  CHECK_FALSE(p.label);
  CHECK(p.status == ParseStatus::Failed);
  CHECK_FALSE(parse_label("The driver was a minority shareholder.", StrategyKind::ZeroShot).label);
}

TEST_CASE("CoT takes the last label, other strategies the first") {
  const std::string text =
      "One might guess No apparent or minor injury, but the rider was not wearing a helmet. "
      "Final answer: Serious injury or fatal accident";
  CHECK(parse_label(text, StrategyKind::ZeroShotCoT).label == S);
  CHECK(parse_label(text, StrategyKind::ZeroShot).label == M);
}

TEST_CASE("metrics on a hand-computed confusion matrix") {
  // gold minor: 3 right, 1 wrong; gold severe: 2 right, 2 wrong
  std::vector<Prediction> ps;
  for (int i = 0; i < 3; ++i) ps.push_back(pred(M, M));
  ps.push_back(pred(M, S));
  for (int i = 0; i < 2; ++i) ps.push_back(pred(S, S));
  for (int i = 0; i < 2; ++i) ps.push_back(pred(S, M));
  const auto m = compute_metrics(ps);
  CHECK(m.accuracy == doctest::Approx(5.0 / 8));
  const double p0 = 3.0 / 5, r0 = 3.0 / 4, p1 = 2.0 / 3, r1 = 2.0 / 4;
  CHECK(m.macro_precision == doctest::Approx((p0 + p1) / 2));
  CHECK(m.macro_recall == doctest::Approx((r0 + r1) / 2));
  CHECK(m.macro_f1 == doctest::Approx((2 * p0 * r0 / (p0 + r0) + 2 * p1 * r1 / (p1 + r1)) / 2));
  CHECK(m.confusion[0][1] == 1);
}

TEST_CASE("always predicting one class on a balanced set") {
  std::vector<Prediction> ps;
  for (int i = 0; i < 10; ++i) ps.push_back(pred(i % 2 ? S : M, M));
  const auto m = compute_metrics(ps);
  CHECK(m.macro_f1 == doctest::Approx(1.0 / 3));
  CHECK(m.accuracy == doctest::Approx(0.5));
  CHECK(m.macro_precision == doctest::Approx(0.25));
}

TEST_CASE("failed parses lower recall but are never a predicted class") {
  const auto m = compute_metrics({pred(M, M), pred(S, S), pred(S, std::nullopt)});
  CHECK(m.n == 3);
  CHECK(m.n_failed_parses == 1);
  CHECK(m.accuracy == doctest::Approx(2.0 / 3));
  CHECK(m.macro_precision == doctest::Approx(1.0));
  CHECK(m.macro_recall == doctest::Approx(0.75));
  CHECK_THROWS_AS(compute_metrics({pred(M, std::nullopt)}), Error);
}

TEST_CASE("metrics formatting") {
  MetricsReport m;
  m.macro_f1 = 0.73614;
  m.accuracy = 0.73952;
  m.macro_recall = 0.5;
  m.macro_precision = 1.0;
  CHECK(format_metrics(m) == "Macro-F1\tAccuracy\tMacro-Recall\tMacro-Precision\n0.7361\t0.7395\t0.5000\t1.0000\n");
  const auto j = nlohmann::json::parse(metrics_to_json(m));
  CHECK(j["macro_f1"] == 0.73614);
}

TEST_CASE("run_eval keeps order and records raw output") {
  const std::vector<EvalCase> cases{{"A", "motorcycle at dusk", S}, {"B", "sedan at noon", M}};
  StubChatClient client([](const ChatRequest& r) -> std::string {
    return r.user.find("motorcycle") != std::string::npos ? "Serious injury or fatal" : "hmm";
  });
  const auto ps = run_eval(cases, {StrategyKind::ZeroShot, {}}, client, "m", RetryPolicy{}, 2);
  REQUIRE(ps.size() == 2);
  CHECK(ps[0].caseno == "A");
  CHECK(ps[0].label == S);
  CHECK(ps[1].status == ParseStatus::Failed);
  const auto lines = predictions_to_jsonl(ps);
  CHECK(lines.find("\"label\":null") != std::string::npos);
}

TEST_CASE("SFT records") {
  const auto rs = build_sft_dataset({{"C1", "A motorcycle crashed at dusk.", S},
                                     {"C2", "A sedan stopped at noon.", M}});
  REQUIRE(rs.size() == 2);
  CHECK(rs[0].response == "Serious injury or fatal");
  CHECK(rs[1].response == "No apparent or minor injury");
  CHECK(rs[0].user == "A motorcycle crashed at dusk.\n\n" + std::string(kSftQuestion));
  const auto full = render_sft(rs[0]);
  CHECK(full.substr(rs[0].mask_boundary) == rs[0].response);
  CHECK(full.substr(0, rs[0].mask_boundary).find("Serious injury") == std::string::npos);
  CHECK(parse_label_text(rs[1].response) == M);
  CHECK(leakage_scan(rs).empty());
  CHECK(sft_from_jsonl(sft_to_jsonl(rs))[0].mask_boundary == rs[0].mask_boundary);
}

TEST_CASE("leakage is rejected") {
  CHECK_THROWS_AS(build_sft_dataset({{"C1", "Outcome: serious INJURY or fatal.", S}}), Error);
  auto rs = build_sft_dataset({{"C1", "Plain text.", S}});
  rs[0].user += " No apparent or minor injury";
  CHECK(leakage_scan(rs) == std::vector<std::string>{"C1"});
  try {
    sft_from_jsonl("{\"caseno\":\"x\"}\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 1);
  }
}
