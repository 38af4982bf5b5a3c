#include <string>

#include "doctest.h"
#include "oracles.hpp"

#include "crashxai/attribution.hpp"

using namespace crashxai;

TEST_CASE("occlusion equals brute-force recomputation") {
  auto m = TinyLM::random(15, 6, 3, 21, 0.9);
  m.position(1) = 0.0;  // a model that ignores one position
  const std::vector<int> x{0, 4, 9, 4, 12};
  const std::vector<int> y{3, 1};
  const auto I = occlusion_importance(m, x, y);
  CHECK(I.values.rows() == 7);
  CHECK(I.values.cols() == 2);
  CHECK(I.input_tokens == std::vector<int>{0, 4, 9, 4, 12, 3, 1});
  const auto ref = oracle::occlusion(m, x, y);
  CHECK((I.values - ref).cwiseAbs().maxCoeff() <= 1e-15);
  // rows at or after response position m are zero in column m
  CHECK(I.values(5, 0) == 0.0);
  CHECK(I.values(6, 0) == 0.0);
  CHECK(I.values(6, 1) == 0.0);
  CHECK(I.values(5, 1) != 0.0);
  // parallel evaluation gives the same matrix
  CHECK(occlusion_importance(m, x, y, {}, 3).values == I.values);
}

TEST_CASE("occlusion of a single-token context uses the substitute") {
  const auto m = TinyLM::random(6, 3, 2, 2, 0.9);
  const auto I = occlusion_importance(m, {5}, {1});
  CHECK(I.values(0, 0) == doctest::Approx(prob(m, {5}, 1) - prob(m, {0}, 1)));
  OcclusionOptions sub{true, 2};
  const auto S = occlusion_importance(m, {5, 4}, {1}, sub);
  CHECK(S.values(0, 0) == doctest::Approx(prob(m, {5, 4}, 1) - prob(m, {2, 4}, 1)));
}

TEST_CASE("taylor importance is the gradient-embedding product") {
  const auto m = TinyLM::random(10, 4, 4, 8, 0.9);
  const std::vector<int> x{0, 7, 2};
  const std::vector<int> y{3, 1};
  const auto T = taylor_importance(m, x, y);
  const std::vector<int> z1{0, 7, 2, 3};
  const auto fd = oracle::fd_gradient(m, z1, 1);
  for (int n = 0; n < 4; ++n) {
    CHECK(T.values(n, 1) == doctest::Approx(fd.row(n).dot(m.embedding.row(z1[n]))).epsilon(1e-6));
  }
  CHECK(T.values(3, 0) == 0.0);
  CHECK_THROWS_AS(taylor_importance(m, x, {}), Error);
}

TEST_CASE("normalize_scores on a hand-computed matrix") {
  Eigen::MatrixXd I(4, 3);
  I << 2.0, -1.0, 0.3,
       1.0, -2.0, 0.1,
      -1.0, 0.0, 0.0024,
       0.5, -0.5, 0.0;
  const auto S = normalize_scores(I, {});
  ScoreMatrix want(4, 3);
  want << 100, 0, 100,
           50, 0, 34,
            0, 0, 0,
           25, 0, 0;
  CHECK(S == want);
}

TEST_CASE("normalize_scores agrees with the oracle") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto rows = 1 + static_cast<Eigen::Index>(rng.index(10));
    const auto cols = 1 + static_cast<Eigen::Index>(rng.index(4));
    Eigen::MatrixXd I(rows, cols);
    for (Eigen::Index k = 0; k < I.size(); ++k) I.data()[k] = rng.uniform(-1.0, 1.0);
    const NormalizationConfig cfg{1 + static_cast<int>(rng.index(200)), static_cast<int>(rng.index(5))};
    CHECK(normalize_scores(I, cfg) == oracle::normalize(I, cfg.L, cfg.b));
  }
}

TEST_CASE("word scores take the maximum over sub-tokens and columns") {
  const auto tok = Tokenizer::build(TokenizerMode::Subword, {"hit and run crash"}, 1);
  const std::string text = "crash hit-and-run";
  const auto spans = tok.encode_spans(text);
  // crash | hit ##- ##a ##n ##d ##- ##r ##u ##n
  REQUIRE(spans.size() == 10);
  ScoreMatrix S = ScoreMatrix::Zero(2 + 10, 2);
  S(2, 0) = 50;
  S(3, 0) = 10;
  S(6, 1) = 368;
  S(11, 0) = 200;
  const auto words = aggregate_to_words(S, spans, 2, text, 100.0);
  REQUIRE(words.size() == 2);
  CHECK(words[0].score == doctest::Approx(0.5));
  CHECK(words[1].word == "hit-and-run");
  CHECK(words[1].token_ids.size() == 9);
  CHECK(annotate_narrative(text, words) == "crash[0.50] hit-and-run[3.68]");
  CHECK_THROWS_AS(aggregate_to_words(S, spans, 3, text), Error);
  CHECK_THROWS_AS(aggregate_to_words(S, spans, 2, text, 0.0), Error);
}

TEST_CASE("annotation format, stripping and parsing") {
  const std::string text = "On June 29, 2022, at dusk";
  std::vector<WordAttribution> words{{"On", 0, 2, 1.92, {}},
                                     {"June", 3, 7, 1.96, {}},
                                     {"29,", 8, 11, 2.66, {}},
                                     {"2022,", 12, 17, 4.28, {}}};
  const auto annotated = annotate_narrative(text, words);
  CHECK(annotated == "On[1.92] June[1.96] 29,[2.66] 2022,[4.28] at dusk");
  CHECK(strip_annotations(annotated) == text);
  const auto parsed = parse_annotations(annotated);
  REQUIRE(parsed.size() == 4);
  CHECK(parsed[3].first == "2022,");
  CHECK(parsed[3].second == doctest::Approx(4.28));

  const auto high = high_attribution_words(words);
  CHECK(high.front().word == "2022,");
  CHECK(high.back().word == "On");
}

TEST_CASE("stripping a full annotated narrative restores it byte for byte") {
  const std::string text = "Vehicle 1 [unit] was  a 2005\tHarley-Davidson.\nIt had 4,800 AADT.";
  std::vector<WordAttribution> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t b = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > b) words.push_back({text.substr(b, i - b), b, i, static_cast<double>(b) / 7.0, {}});
  }
  CHECK(strip_annotations(annotate_narrative(text, words)) == text);
}

TEST_CASE("attribution JSON stores sparse entries") {
  AttributionRecord rec;
  rec.caseno = "A1";
  rec.method = AttributionMethod::Taylor;
  rec.tokens = {"<bos>", "dusk", "<label:SeriousOrFatal>"};
  rec.scores = ScoreMatrix::Zero(3, 1);
  rec.scores(1, 0) = 100;
  rec.words = {{"dusk", 0, 4, 5.0, {5}}};
  const auto j = nlohmann::json::parse(attribution_to_json(rec));
  CHECK(j["method"] == "taylor");
  CHECK(j["L"] == 100);
  CHECK(j["score_matrix"]["rows"] == 3);
  CHECK(j["score_matrix"]["entries"] == nlohmann::json::parse("[[1,0,100]]"));
  CHECK(j["words"][0]["word"] == "dusk");
}
