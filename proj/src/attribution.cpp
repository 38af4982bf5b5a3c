#include "crashxai/attribution.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <json.hpp>

namespace crashxai {

std::string_view to_string(AttributionMethod m) {
  return m == AttributionMethod::Occlusion ? "occlusion" : "taylor";
}

ScoreMatrix normalize_scores(const Eigen::MatrixXd& importance, const NormalizationConfig& cfg) {
  if (cfg.L < 1 || cfg.b < 0) throw Error(ErrorKind::InvalidConfig, "need L >= 1 and b >= 0");
  ScoreMatrix out = ScoreMatrix::Zero(importance.rows(), importance.cols());
  for (Eigen::Index m = 0; m < importance.cols(); ++m) {
    const double max = importance.col(m).maxCoeff();
    if (!(max > 0.0)) continue;
    for (Eigen::Index n = 0; n < importance.rows(); ++n) {
      const double s = std::ceil(cfg.L * (importance(n, m) / max));
      if (s > cfg.b) out(n, m) = static_cast<int>(s);
    }
  }
  return out;
}

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

struct WordRange {
  std::size_t begin, end;
};

std::vector<WordRange> whitespace_words(std::string_view text) {
  std::vector<WordRange> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) out.push_back({start, i});
  }
  return out;
}

/// Length of a trailing "[d.dd]" tag ending at `end`, or 0.
std::size_t tag_length(std::string_view s, std::size_t begin, std::size_t end) {
  if (end - begin < 6 || s[end - 1] != ']') return 0;
  std::size_t i = end - 1;
  if (!std::isdigit(static_cast<unsigned char>(s[i - 1])) ||
      !std::isdigit(static_cast<unsigned char>(s[i - 2])) || s[i - 3] != '.') {
    return 0;
  }
  std::size_t j = i - 3;
  std::size_t digits = 0;
  while (j > begin && std::isdigit(static_cast<unsigned char>(s[j - 1]))) {
    --j;
    ++digits;
  }
  if (digits == 0 || j == begin || s[j - 1] != '[') return 0;
  // A tag alone is not a word.
  if (j - 1 == begin) return 0;
  return end - (j - 1);
}

}  // namespace

std::vector<WordAttribution> aggregate_to_words(const ScoreMatrix& scores,
                                                const std::vector<TokenSpan>& spans,
                                                std::size_t first_row, std::string_view narrative,
                                                double display_divisor) {
  if (!(display_divisor > 0.0)) {
    throw Error(ErrorKind::InvalidConfig, "display divisor must be positive");
  }
  if (first_row + spans.size() > static_cast<std::size_t>(scores.rows())) {
    throw Error(ErrorKind::InvalidArgument, "token spans exceed the score matrix");
  }
  std::vector<WordAttribution> words;
  for (const auto& r : whitespace_words(narrative)) {
    words.push_back({std::string(narrative.substr(r.begin, r.end - r.begin)), r.begin, r.end, 0.0, {}});
  }
  std::size_t w = 0;
  std::vector<int> best(words.size(), 0);
  for (std::size_t k = 0; k < spans.size(); ++k) {
    const auto& s = spans[k];
    while (w < words.size() && words[w].end <= s.begin) ++w;
    if (w == words.size() || s.begin < words[w].begin) {
      throw Error(ErrorKind::InvalidArgument, "token span does not fall inside a word");
    }
    words[w].token_ids.push_back(s.id);
    const auto row = static_cast<Eigen::Index>(first_row + k);
    if (scores.cols() > 0) best[w] = std::max(best[w], scores.row(row).maxCoeff());
  }
  for (std::size_t i = 0; i < words.size(); ++i) words[i].score = best[i] / display_divisor;
  return words;
}

std::vector<WordAttribution> high_attribution_words(const std::vector<WordAttribution>& words) {
  std::vector<WordAttribution> out;
  for (const auto& w : words) {
    if (w.score > 0.0) out.push_back(w);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.score > b.score; });
  return out;
}

std::string annotate_narrative(std::string_view narrative, const std::vector<WordAttribution>& words) {
  std::string out;
  std::size_t pos = 0;
  for (const auto& w : words) {
    if (w.begin < pos || w.end > narrative.size() || w.end < w.begin) {
      throw Error(ErrorKind::InvalidArgument, "word spans must be ordered and in range");
    }
    out.append(narrative.substr(pos, w.end - pos));
    out += "[" + format_fixed(w.score, 2) + "]";
    pos = w.end;
  }
  out.append(narrative.substr(pos));
  return out;
}

std::string strip_annotations(std::string_view annotated) {
  std::string out;
  std::size_t pos = 0;
  for (const auto& r : whitespace_words(annotated)) {
    const std::size_t tag = tag_length(annotated, r.begin, r.end);
    out.append(annotated.substr(pos, r.end - tag - pos));
    pos = r.end;
  }
  out.append(annotated.substr(pos));
  return out;
}

std::vector<std::pair<std::string, double>> parse_annotations(std::string_view annotated) {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& r : whitespace_words(annotated)) {
    const std::size_t tag = tag_length(annotated, r.begin, r.end);
    if (tag == 0) continue;
    const std::string word(annotated.substr(r.begin, r.end - r.begin - tag));
    const std::string value(annotated.substr(r.end - tag + 1, tag - 2));
    out.emplace_back(word, std::stod(value));
  }
  return out;
}

std::string attribution_to_json(const AttributionRecord& rec) {
  nlohmann::ordered_json j;
  j["caseno"] = rec.caseno;
  j["method"] = std::string(to_string(rec.method));
  j["L"] = rec.norm.L;
  j["b"] = rec.norm.b;
  j["tokens"] = rec.tokens;
  nlohmann::ordered_json entries = nlohmann::ordered_json::array();
  for (Eigen::Index m = 0; m < rec.scores.cols(); ++m) {
    for (Eigen::Index n = 0; n < rec.scores.rows(); ++n) {
      if (rec.scores(n, m) != 0) entries.push_back({n, m, rec.scores(n, m)});
    }
  }
  j["score_matrix"] = {{"rows", rec.scores.rows()}, {"cols", rec.scores.cols()}, {"entries", entries}};
  nlohmann::ordered_json words = nlohmann::ordered_json::array();
  for (const auto& w : rec.words) {
    nlohmann::ordered_json o;
    o["word"] = w.word;
    o["start"] = w.begin;
    o["end"] = w.end;
    o["score"] = w.score;
    words.push_back(o);
  }
  j["words"] = words;
  return j.dump(1) + "\n";
}

}  // namespace crashxai
