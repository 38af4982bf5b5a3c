#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "crashxai/refmodel.hpp"
#include "crashxai/tokenizer.hpp"
#include "crashxai/util.hpp"

namespace crashxai {

enum class AttributionMethod { Occlusion, Taylor };

std::string_view to_string(AttributionMethod m);

/// I(n, m): influence of context position n on response token m. Rows cover
/// the prompt followed by the response (N = |X| + |Y|); rows at or after
/// response position m are zero in column m.
struct ImportanceMatrix {
  Eigen::MatrixXd values;
  std::vector<int> input_tokens;
  std::vector<int> output_tokens;
  AttributionMethod method = AttributionMethod::Occlusion;
};

using ScoreMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

struct NormalizationConfig {
  int L = 100;
  int b = 1;
};

struct OcclusionOptions {
  /// Replace the token with `substitute_id` instead of deleting it.
  bool substitute = false;
  int substitute_id = 0;
};

namespace detail {

inline std::vector<int> context_for(const std::vector<int>& x, const std::vector<int>& y,
                                    std::size_t m) {
  std::vector<int> z = x;
  z.insert(z.end(), y.begin(), y.begin() + static_cast<std::ptrdiff_t>(m));
  return z;
}

inline void check_attribution_input(const std::vector<int>& x, const std::vector<int>& y) {
  if (y.empty()) throw Error(ErrorKind::InvalidArgument, "response tokens must be non-empty");
  if (x.empty()) throw Error(ErrorKind::InvalidArgument, "prompt tokens must be non-empty");
}

}  // namespace detail

/// I(n, m) = p(y_m | Z_m) - p(y_m | Z_m without x_n). When deleting leaves an
/// empty context, the substitute token stands in for it.
template <typename Model>
ImportanceMatrix occlusion_importance(const Model& model, const std::vector<int>& x,
                                      const std::vector<int>& y,
                                      const OcclusionOptions& opts = {}, int jobs = 1) {
  detail::check_attribution_input(x, y);
  const std::size_t N = x.size() + y.size();
  ImportanceMatrix out{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N),
                                             static_cast<Eigen::Index>(y.size())),
                       x, y, AttributionMethod::Occlusion};
  out.input_tokens.insert(out.input_tokens.end(), y.begin(), y.end());
  parallel_for(y.size(), jobs, [&](std::size_t m) {
    const auto z = detail::context_for(x, y, m);
    const double base = static_cast<double>(prob(model, z, y[m]));
    for (std::size_t n = 0; n < z.size(); ++n) {
      std::vector<int> occluded = z;
      if (opts.substitute) {
        occluded[n] = opts.substitute_id;
      } else {
        occluded.erase(occluded.begin() + static_cast<std::ptrdiff_t>(n));
        if (occluded.empty()) occluded.push_back(opts.substitute_id);
      }
      out.values(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m)) =
          base - static_cast<double>(prob(model, occluded, y[m]));
    }
  });
  return out;
}

/// I(n, m) = <d p(y_m | Z_m) / d E[x_n], E[x_n]>, one gradient pass per m.
template <typename Model>
ImportanceMatrix taylor_importance(const Model& model, const std::vector<int>& x,
                                   const std::vector<int>& y,
                                   GradientOf of = GradientOf::Probability, int jobs = 1) {
  detail::check_attribution_input(x, y);
  const std::size_t N = x.size() + y.size();
  ImportanceMatrix out{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N),
                                             static_cast<Eigen::Index>(y.size())),
                       x, y, AttributionMethod::Taylor};
  out.input_tokens.insert(out.input_tokens.end(), y.begin(), y.end());
  parallel_for(y.size(), jobs, [&](std::size_t m) {
    const auto z = detail::context_for(x, y, m);
    const auto grad = grad_prob_wrt_embeddings(model, z, y[m], of);
    for (std::size_t n = 0; n < z.size(); ++n) {
      const auto row = static_cast<Eigen::Index>(n);
      out.values(row, static_cast<Eigen::Index>(m)) =
          static_cast<double>(grad.row(row).dot(model.embedding.row(z[n])));
    }
  });
  return out;
}

/// S(n, m) = ceil(L * (I(n, m) / max_n' I(n', m))) when that exceeds b,
/// otherwise 0. Columns whose max is not positive are all zero.
ScoreMatrix normalize_scores(const Eigen::MatrixXd& importance, const NormalizationConfig& cfg);

struct WordAttribution {
  std::string word;
  std::size_t begin = 0;
  std::size_t end = 0;
  double score = 0.0;
  std::vector<int> token_ids;
};

/// Word scores for `narrative`, whose tokens `spans` (from
/// Tokenizer::encode_spans) occupy score rows first_row, first_row+1, ...
/// Score = max over the word's tokens of max over columns, / display_divisor.
std::vector<WordAttribution> aggregate_to_words(const ScoreMatrix& scores,
                                                const std::vector<TokenSpan>& spans,
                                                std::size_t first_row, std::string_view narrative,
                                                double display_divisor = 1.0);

/// Words with a positive score, highest first (ties by position).
std::vector<WordAttribution> high_attribution_words(const std::vector<WordAttribution>& words);

/// Appends "[x.xx]" after each listed word: "On[1.92] June[1.96] 29,[2.66]".
std::string annotate_narrative(std::string_view narrative, const std::vector<WordAttribution>& words);

/// Removes one trailing "[d.dd]" tag from every whitespace-delimited word.
std::string strip_annotations(std::string_view annotated);

/// Parses "word[x.xx]" pairs back out of an annotated narrative.
std::vector<std::pair<std::string, double>> parse_annotations(std::string_view annotated);

struct AttributionRecord {
  std::string caseno;
  AttributionMethod method = AttributionMethod::Occlusion;
  NormalizationConfig norm;
  std::vector<std::string> tokens;
  ScoreMatrix scores;
  std::vector<WordAttribution> words;
};

/// {"caseno", "method", "L", "b", "tokens", "score_matrix": {"rows", "cols",
///  "entries": [[n, m, s], ...]}, "words": [{"word","start","end","score"}]}
std::string attribution_to_json(const AttributionRecord& rec);

}  // namespace crashxai
