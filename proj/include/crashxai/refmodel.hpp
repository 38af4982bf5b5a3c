#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "crashxai/error.hpp"
#include "crashxai/tokenizer.hpp"
#include "crashxai/util.hpp"

namespace crashxai {

/// Tiny next-token model: position-weighted embedding average, tanh, then a
/// linear-softmax head.
///
///   h = (1/n) * sum_i w[slot(i)] * E[x_i],   slot(i) = min(n-1-i, W-1)
///   z = tanh(h)
///   p = softmax(O^T z + b)
///
/// Positions at least W-1 tokens from the end share the last weight, so the
/// whole context stays visible.
template <typename Scalar>
class BasicTinyLM {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix embedding;  // V x d
  Vector position;   // W
  Matrix output;     // d x V
  Vector bias;       // V

  BasicTinyLM() = default;

  /// Zero embeddings and head, unit position weights.
  BasicTinyLM(int vocab, int dim = 32, int window = 16)
      : embedding(Matrix::Zero(vocab, dim)),
        position(Vector::Ones(window)),
        output(Matrix::Zero(dim, vocab)),
        bias(Vector::Zero(vocab)) {
    if (vocab < 1 || dim < 1 || window < 1) {
      throw Error(ErrorKind::InvalidArgument, "model dimensions must be positive");
    }
  }

  /// Embeddings and head drawn from U(-scale, scale); unit position weights,
  /// zero bias.
  static BasicTinyLM random(int vocab, int dim, int window, std::uint64_t seed,
                            double scale = 0.05) {
    BasicTinyLM m(vocab, dim, window);
    Rng rng(seed);
    for (Eigen::Index i = 0; i < m.embedding.size(); ++i) {
      m.embedding.data()[i] = static_cast<Scalar>(rng.uniform(-scale, scale));
    }
    for (Eigen::Index i = 0; i < m.output.size(); ++i) {
      m.output.data()[i] = static_cast<Scalar>(rng.uniform(-scale, scale));
    }
    return m;
  }

  int vocab_size() const { return static_cast<int>(embedding.rows()); }
  int dim() const { return static_cast<int>(embedding.cols()); }
  int window() const { return static_cast<int>(position.size()); }

  bool all_finite() const {
    return embedding.allFinite() && position.allFinite() && output.allFinite() &&
           bias.allFinite();
  }

  bool operator==(const BasicTinyLM& o) const {
    return embedding == o.embedding && position == o.position && output == o.output &&
           bias == o.bias;
  }
};

using TinyLM = BasicTinyLM<double>;

inline int position_slot(std::size_t n, std::size_t i, int window) {
  return static_cast<int>(std::min<std::size_t>(n - 1 - i, static_cast<std::size_t>(window - 1)));
}

namespace detail {

template <typename Scalar>
void check_context(const BasicTinyLM<Scalar>& m, const std::vector<int>& context) {
  if (context.empty()) throw Error(ErrorKind::InvalidArgument, "context must be non-empty");
  for (int t : context) {
    if (t < 0 || t >= m.vocab_size()) {
      throw Error(ErrorKind::InvalidArgument, "token id out of vocabulary: " + std::to_string(t));
    }
  }
}

template <typename Scalar>
void check_target(const BasicTinyLM<Scalar>& m, int target) {
  if (target < 0 || target >= m.vocab_size()) {
    throw Error(ErrorKind::InvalidArgument, "target id out of vocabulary: " + std::to_string(target));
  }
}

template <typename Vec>
Vec softmax(const Vec& logits) {
  Vec e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

}  // namespace detail

/// Pre-activation hidden state h for a context prefix of length n.
template <typename Scalar>
typename BasicTinyLM<Scalar>::Vector hidden_state(const BasicTinyLM<Scalar>& m,
                                                  const std::vector<int>& context,
                                                  std::size_t n) {
  typename BasicTinyLM<Scalar>::Vector h = BasicTinyLM<Scalar>::Vector::Zero(m.dim());
  for (std::size_t i = 0; i < n; ++i) {
    h += m.position(position_slot(n, i, m.window())) * m.embedding.row(context[i]).transpose();
  }
  return h / static_cast<Scalar>(n);
}

template <typename Scalar>
typename BasicTinyLM<Scalar>::Vector logits(const BasicTinyLM<Scalar>& m,
                                            const std::vector<int>& context) {
  detail::check_context(m, context);
  const typename BasicTinyLM<Scalar>::Vector z = hidden_state(m, context, context.size()).array().tanh().matrix();
  return m.output.transpose() * z + m.bias;
}

/// Next-token distribution given the context.
template <typename Scalar>
typename BasicTinyLM<Scalar>::Vector probabilities(const BasicTinyLM<Scalar>& m,
                                                   const std::vector<int>& context) {
  return detail::softmax(logits(m, context));
}

template <typename Scalar>
Scalar prob(const BasicTinyLM<Scalar>& m, const std::vector<int>& context, int target) {
  detail::check_target(m, target);
  return probabilities(m, context)(target);
}

enum class GradientOf { Probability, Logit };

/// Gradient of p(target | context) (or of the target logit) with respect to
/// the embedding vector occupying each context position; row i belongs to
/// position i.
template <typename Scalar>
typename BasicTinyLM<Scalar>::Matrix grad_prob_wrt_embeddings(
    const BasicTinyLM<Scalar>& m, const std::vector<int>& context, int target,
    GradientOf of = GradientOf::Probability) {
  using Vector = typename BasicTinyLM<Scalar>::Vector;
  detail::check_context(m, context);
  detail::check_target(m, target);
  const std::size_t n = context.size();
  const Vector z = hidden_state(m, context, n).array().tanh().matrix();

  Vector g_z;
  if (of == GradientOf::Logit) {
    g_z = m.output.col(target);
  } else {
    const Vector p = detail::softmax(Vector(m.output.transpose() * z + m.bias));
    g_z = p(target) * (m.output.col(target) - m.output * p);
  }
  const Vector g_h = g_z.array() * (Scalar(1) - z.array().square());

  typename BasicTinyLM<Scalar>::Matrix grad(static_cast<Eigen::Index>(n), m.dim());
  for (std::size_t i = 0; i < n; ++i) {
    grad.row(static_cast<Eigen::Index>(i)) =
        (m.position(position_slot(n, i, m.window())) / static_cast<Scalar>(n)) * g_h.transpose();
  }
  return grad;
}

// ---------------------------------------------------------------------------
// training

struct TrainingExample {
  std::vector<int> tokens;
  /// loss_mask[j] selects tokens[j] as a prediction target (j >= 1).
  std::vector<bool> loss_mask;
};

struct TrainingConfig {
  double learning_rate = 0.5;
  int epochs = 20;
  std::uint64_t seed = 0;
};

template <typename Scalar>
struct TrainingResult {
  BasicTinyLM<Scalar> model;
  /// Mean negative log-likelihood per unmasked token after each epoch.
  std::vector<double> epoch_loss;
};

/// Sum over unmasked positions of log p(t_j | t_1..t_{j-1}).
template <typename Scalar>
double masked_log_likelihood(const BasicTinyLM<Scalar>& m, const TrainingExample& ex) {
  double total = 0.0;
  for (std::size_t j = 1; j < ex.tokens.size(); ++j) {
    if (!ex.loss_mask[j]) continue;
    const std::vector<int> prefix(ex.tokens.begin(), ex.tokens.begin() + static_cast<std::ptrdiff_t>(j));
    total += std::log(static_cast<double>(prob(m, prefix, ex.tokens[j])));
  }
  return total;
}

namespace detail {

inline void check_example(int vocab, const TrainingExample& ex) {
  if (ex.tokens.size() != ex.loss_mask.size()) {
    throw Error(ErrorKind::InvalidArgument, "loss mask length differs from token count");
  }
  for (int t : ex.tokens) {
    if (t < 0 || t >= vocab) {
      throw Error(ErrorKind::InvalidArgument, "token id out of vocabulary: " + std::to_string(t));
    }
  }
}

/// Adds lr * d(masked log-likelihood)/d(params) for one example into `m`.
template <typename Scalar>
void sgd_step(BasicTinyLM<Scalar>& m, const TrainingExample& ex, Scalar lr) {
  using Matrix = typename BasicTinyLM<Scalar>::Matrix;
  using Vector = typename BasicTinyLM<Scalar>::Vector;
  Matrix d_emb = Matrix::Zero(m.embedding.rows(), m.embedding.cols());
  Vector d_pos = Vector::Zero(m.position.size());
  Matrix d_out = Matrix::Zero(m.output.rows(), m.output.cols());
  Vector d_bias = Vector::Zero(m.bias.size());
  bool any = false;

  for (std::size_t n = 1; n < ex.tokens.size(); ++n) {
    if (!ex.loss_mask[n]) continue;
    any = true;
    const int target = ex.tokens[n];
    const Vector h = hidden_state(m, ex.tokens, n);
    const Vector z = h.array().tanh().matrix();
    Vector delta = -softmax(Vector(m.output.transpose() * z + m.bias));
    delta(target) += Scalar(1);

    d_out.noalias() += z * delta.transpose();
    d_bias += delta;
    const Vector g_h = (m.output * delta).array() * (Scalar(1) - z.array().square());
    const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const int slot = position_slot(n, i, m.window());
      const int tok = ex.tokens[i];
      d_emb.row(tok) += (m.position(slot) * inv_n) * g_h.transpose();
      d_pos(slot) += inv_n * m.embedding.row(tok).dot(g_h);
    }
  }
  if (!any) return;
  m.embedding += lr * d_emb;
  m.position += lr * d_pos;
  m.output += lr * d_out;
  m.bias += lr * d_bias;
}

}  // namespace detail

/// Gradient ascent on the masked log-likelihood, one update per example,
/// examples visited in a seeded shuffled order each epoch. Throws
/// TrainingDivergedError when the loss or any parameter becomes non-finite.
template <typename Scalar>
TrainingResult<Scalar> train(BasicTinyLM<Scalar> model, const std::vector<TrainingExample>& examples,
                             const TrainingConfig& cfg) {
  std::size_t targets = 0;
  for (const auto& ex : examples) {
    detail::check_example(model.vocab_size(), ex);
    for (std::size_t j = 1; j < ex.tokens.size(); ++j) targets += ex.loss_mask[j] ? 1 : 0;
  }
  TrainingResult<Scalar> result;
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(examples.size());
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    for (std::size_t idx : order) {
      detail::sgd_step(model, examples[idx], static_cast<Scalar>(cfg.learning_rate));
    }
    double nll = 0.0;
    for (const auto& ex : examples) nll -= masked_log_likelihood(model, ex);
    const double loss = targets == 0 ? 0.0 : nll / static_cast<double>(targets);
    if (!std::isfinite(loss) || !model.all_finite()) throw TrainingDivergedError(epoch);
    result.epoch_loss.push_back(loss);
  }
  result.model = std::move(model);
  return result;
}

// ---------------------------------------------------------------------------
// prompts and classification

/// BOS followed by the encoded prompt.
inline std::vector<int> prompt_context(const Tokenizer& tok, std::string_view prompt) {
  std::vector<int> ctx{tok.bos()};
  const auto ids = tok.encode(prompt);
  ctx.insert(ctx.end(), ids.begin(), ids.end());
  return ctx;
}

/// Response token sequence for a severity label.
inline std::vector<int> label_sequence(const Tokenizer& tok, Severity s) {
  return {tok.label(s), tok.eos()};
}

/// Prompt tokens masked out, label tokens as targets.
inline TrainingExample make_training_example(const Tokenizer& tok, std::string_view prompt,
                                             Severity label) {
  TrainingExample ex;
  ex.tokens = prompt_context(tok, prompt);
  ex.loss_mask.assign(ex.tokens.size(), false);
  for (int t : label_sequence(tok, label)) {
    ex.tokens.push_back(t);
    ex.loss_mask.push_back(true);
  }
  return ex;
}

struct Classification {
  Severity label = Severity::NoApparentOrMinor;
  double log_prob_minor = 0.0;
  double log_prob_severe = 0.0;
  bool tie = false;
};

/// Scores each label's token sequence after the prompt; exact ties go to
/// NoApparentOrMinor with `tie` set.
template <typename Scalar>
Classification classify(const BasicTinyLM<Scalar>& m, const Tokenizer& tok, std::string_view prompt) {
  const auto ctx = prompt_context(tok, prompt);
  auto score = [&](Severity s) {
    std::vector<int> seq = ctx;
    double total = 0.0;
    for (int t : label_sequence(tok, s)) {
      total += std::log(static_cast<double>(prob(m, seq, t)));
      seq.push_back(t);
    }
    return total;
  };
  Classification c;
  c.log_prob_minor = score(Severity::NoApparentOrMinor);
  c.log_prob_severe = score(Severity::SeriousOrFatal);
  c.tie = c.log_prob_minor == c.log_prob_severe;
  c.label = c.log_prob_severe > c.log_prob_minor ? Severity::SeriousOrFatal
                                                 : Severity::NoApparentOrMinor;
  return c;
}

// ---------------------------------------------------------------------------
// checkpoint

/// {"format": "crashxai-tinylm", "version": 1, "vocab_size", "dim", "window",
///  "embedding": [[row]...], "position": [...], "output": [[row]...], "bias": [...]}
/// Matrices are stored row-major; numbers round-trip exactly.
template <typename Scalar>
std::string checkpoint_to_json(const BasicTinyLM<Scalar>& m) {
  auto rows = [](const auto& mat) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index r = 0; r < mat.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(mat.cols()));
      for (Eigen::Index c = 0; c < mat.cols(); ++c) row[static_cast<std::size_t>(c)] = static_cast<double>(mat(r, c));
      a.push_back(row);
    }
    return a;
  };
  auto vec = [](const auto& v) {
    std::vector<double> out(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<double>(v(i));
    return out;
  };
  nlohmann::ordered_json j;
  j["format"] = "crashxai-tinylm";
  j["version"] = 1;
  j["vocab_size"] = m.vocab_size();
  j["dim"] = m.dim();
  j["window"] = m.window();
  j["embedding"] = rows(m.embedding);
  j["position"] = vec(m.position);
  j["output"] = rows(m.output);
  j["bias"] = vec(m.bias);
  return j.dump() + "\n";
}

template <typename Scalar = double>
BasicTinyLM<Scalar> checkpoint_from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object() || j.value("format", "") != "crashxai-tinylm") {
    throw Error(ErrorKind::Parse, "not a crashxai model checkpoint");
  }
  if (j.value("version", 0) != 1) throw Error(ErrorKind::Parse, "unsupported checkpoint version");
  try {
    BasicTinyLM<Scalar> m(j.at("vocab_size").get<int>(), j.at("dim").get<int>(),
                          j.at("window").get<int>());
    auto fill_rows = [](auto& mat, const nlohmann::json& a) {
      if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != mat.rows()) {
        throw Error(ErrorKind::Parse, "checkpoint matrix has wrong shape");
      }
      for (Eigen::Index r = 0; r < mat.rows(); ++r) {
        const auto row = a[static_cast<std::size_t>(r)].get<std::vector<double>>();
        if (static_cast<Eigen::Index>(row.size()) != mat.cols()) {
          throw Error(ErrorKind::Parse, "checkpoint matrix has wrong shape");
        }
        for (Eigen::Index c = 0; c < mat.cols(); ++c) mat(r, c) = static_cast<Scalar>(row[static_cast<std::size_t>(c)]);
      }
    };
    auto fill_vec = [](auto& v, const nlohmann::json& a) {
      const auto vals = a.get<std::vector<double>>();
      if (static_cast<Eigen::Index>(vals.size()) != v.size()) {
        throw Error(ErrorKind::Parse, "checkpoint vector has wrong length");
      }
      for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = static_cast<Scalar>(vals[static_cast<std::size_t>(i)]);
    };
    fill_rows(m.embedding, j.at("embedding"));
    fill_vec(m.position, j.at("position"));
    fill_rows(m.output, j.at("output"));
    fill_vec(m.bias, j.at("bias"));
    if (!m.all_finite()) throw Error(ErrorKind::Parse, "checkpoint contains non-finite values");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace crashxai
