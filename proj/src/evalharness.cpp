#include "crashxai/evalharness.hpp"

#include <cctype>

#include <json.hpp>

#include "crashxai/util.hpp"

namespace crashxai {

std::string_view to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::ZeroShot: return "zs";
    case StrategyKind::ZeroShotCoT: return "zs-cot";
    case StrategyKind::FewShot: return "fs";
  }
  return "zs";
}

std::optional<StrategyKind> parse_strategy(std::string_view text) {
  for (auto k : {StrategyKind::ZeroShot, StrategyKind::ZeroShotCoT, StrategyKind::FewShot}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

std::string_view to_string(ParseStatus s) {
  switch (s) {
    case ParseStatus::Exact: return "exact";
    case ParseStatus::Fuzzy: return "fuzzy";
    case ParseStatus::Failed: return "failed";
  }
  return "failed";
}

std::string_view label_text(Severity s) {
  return s == Severity::NoApparentOrMinor ? "No apparent or minor injury" : "Serious injury or fatal";
}

void PromptStrategy::validate() const {
  if (kind != StrategyKind::FewShot) return;
  if (exemplars.size() != 2 || exemplars[0].label == exemplars[1].label) {
    throw Error(ErrorKind::InvalidConfig, "few-shot prompting needs exactly one exemplar per label");
  }
}

namespace {

constexpr std::string_view kGiven = "You are given a detailed description for a traffic crash.";
constexpr std::string_view kZsInstruction =
    "Please classify the severity of the crash into one of two categories: 'No apparent or minor "
    "injury', 'Serious injury or fatal accident'.";
constexpr std::string_view kZsOutput =
    "You can only output one of the classification result in your answer.";
constexpr std::string_view kCotInstruction =
    "Please analyze this traffic crash with careful reasoning first, and then classify the severity "
    "of the crash into one of the two categories: 'No apparent or minor injury', 'Serious injury or "
    "fatal accident'.";
constexpr std::string_view kCotOutput =
    "You can only output one of the classification result at the end of your answer.";
constexpr std::string_view kFsIntro =
    "Here are two examples of traffic crashes and their severity classification:";
constexpr std::string_view kFsInstruction =
    "Please classify the severity of the crash into one of two categories: 'No apparent or minor "
    "injury', 'Serious injury or fatal'.";

std::string join_blocks(std::initializer_list<std::string_view> blocks) {
  std::string out;
  for (auto b : blocks) {
    if (!out.empty()) out += "\n\n";
    out += b;
  }
  return out;
}

}  // namespace

Prompt build_prompt(const PromptStrategy& strategy, std::string_view narrative) {
  strategy.validate();
  Prompt p{std::string(kEngineerSystemPrompt), {}};
  switch (strategy.kind) {
    case StrategyKind::ZeroShot:
      p.user = join_blocks({kGiven, kZsInstruction, kZsOutput, narrative});
      break;
    case StrategyKind::ZeroShotCoT:
      p.user = join_blocks({kGiven, kCotInstruction, kCotOutput, narrative});
      break;
    case StrategyKind::FewShot: {
      const auto& minor = strategy.exemplars[0].label == Severity::NoApparentOrMinor
                              ? strategy.exemplars[0]
                              : strategy.exemplars[1];
      const auto& severe = strategy.exemplars[0].label == Severity::NoApparentOrMinor
                               ? strategy.exemplars[1]
                               : strategy.exemplars[0];
      p.user = join_blocks({kFsIntro, minor.narrative, label_text(Severity::NoApparentOrMinor),
                            severe.narrative, label_text(Severity::SeriousOrFatal), kGiven,
                            kFsInstruction, kZsOutput, narrative});
      break;
    }
  }
  return p;
}

std::string render_prompt(const Prompt& p) { return p.system + "\n\n" + p.user; }

// ---------------------------------------------------------------------------
// output parsing

namespace {

/// Lower-case letters and digits; every other run of characters becomes one
/// space, with a space at both ends so phrases can be matched on word
/// boundaries.
std::string normalize_words(std::string_view s) {
  std::string out = " ";
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (out.back() != ' ') {
      out.push_back(' ');
    }
  }
  if (out.back() != ' ') out.push_back(' ');
  return out;
}

struct Hit {
  std::size_t pos;
  Severity label;
};

std::optional<Hit> find_phrases(const std::string& text,
                                const std::vector<std::pair<std::string, Severity>>& phrases,
                                bool last) {
  std::optional<Hit> best;
  for (const auto& [phrase, label] : phrases) {
    const std::string needle = " " + phrase + " ";
    const auto pos = last ? text.rfind(needle) : text.find(needle);
    if (pos == std::string::npos) continue;
    if (!best || (last ? pos > best->pos : pos < best->pos)) best = Hit{pos, label};
  }
  return best;
}

}  // namespace

ParsedLabel parse_label(std::string_view raw_output, StrategyKind strategy) {
  const std::string text = normalize_words(raw_output);
  const bool last = strategy == StrategyKind::ZeroShotCoT;
  static const std::vector<std::pair<std::string, Severity>> kExact{
      {"no apparent or minor injury", Severity::NoApparentOrMinor},
      {"serious injury or fatal", Severity::SeriousOrFatal}};
  static const std::vector<std::pair<std::string, Severity>> kFuzzy{
      {"no apparent", Severity::NoApparentOrMinor},
      {"minor", Severity::NoApparentOrMinor},
      {"serious", Severity::SeriousOrFatal},
      {"fatal", Severity::SeriousOrFatal},
      {"fatality", Severity::SeriousOrFatal},
      {"severe", Severity::SeriousOrFatal}};
  if (auto hit = find_phrases(text, kExact, last)) return {hit->label, ParseStatus::Exact};
  if (auto hit = find_phrases(text, kFuzzy, last)) return {hit->label, ParseStatus::Fuzzy};
  return {std::nullopt, ParseStatus::Failed};
}

// ---------------------------------------------------------------------------
// metrics

MetricsReport metrics_from_confusion(const std::array<std::array<long long, 2>, 2>& confusion,
                                     const std::array<long long, 2>& failed) {
  MetricsReport m;
  m.confusion = confusion;
  m.failed = failed;
  m.n_failed_parses = failed[0] + failed[1];
  long long parsed = 0;
  for (const auto& row : confusion) parsed += row[0] + row[1];
  m.n = parsed + m.n_failed_parses;
  double f1_sum = 0, p_sum = 0, r_sum = 0;
  for (int c = 0; c < 2; ++c) {
    const double tp = static_cast<double>(confusion[c][c]);
    const double predicted = static_cast<double>(confusion[0][c] + confusion[1][c]);
    const double actual = static_cast<double>(confusion[c][0] + confusion[c][1] + failed[c]);
    const double precision = predicted > 0 ? tp / predicted : 0.0;
    const double recall = actual > 0 ? tp / actual : 0.0;
    const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    f1_sum += f1;
    p_sum += precision;
    r_sum += recall;
  }
  m.macro_f1 = f1_sum / 2;
  m.macro_precision = p_sum / 2;
  m.macro_recall = r_sum / 2;
  m.accuracy = m.n > 0 ? static_cast<double>(confusion[0][0] + confusion[1][1]) / static_cast<double>(m.n) : 0.0;
  return m;
}

MetricsReport compute_metrics(const std::vector<Prediction>& predictions) {
  std::array<std::array<long long, 2>, 2> confusion{};
  std::array<long long, 2> failed{};
  for (const auto& p : predictions) {
    const auto g = static_cast<std::size_t>(p.gold);
    if (p.label) {
      ++confusion[g][static_cast<std::size_t>(*p.label)];
    } else {
      ++failed[g];
    }
  }
  if (confusion[0][0] + confusion[0][1] + confusion[1][0] + confusion[1][1] == 0) {
    throw Error(ErrorKind::InvalidArgument, "no parsed predictions to score");
  }
  return metrics_from_confusion(confusion, failed);
}

std::string metrics_to_json(const MetricsReport& m) {
  nlohmann::ordered_json j;
  j["macro_f1"] = m.macro_f1;
  j["accuracy"] = m.accuracy;
  j["macro_recall"] = m.macro_recall;
  j["macro_precision"] = m.macro_precision;
  j["confusion"] = {{m.confusion[0][0], m.confusion[0][1]}, {m.confusion[1][0], m.confusion[1][1]}};
  j["failed_by_gold"] = {m.failed[0], m.failed[1]};
  j["n_failed_parses"] = m.n_failed_parses;
  j["n"] = m.n;
  return j.dump(1) + "\n";
}

std::string format_metrics(const MetricsReport& m) {
  return "Macro-F1\tAccuracy\tMacro-Recall\tMacro-Precision\n" + format_fixed(m.macro_f1, 4) +
         "\t" + format_fixed(m.accuracy, 4) + "\t" + format_fixed(m.macro_recall, 4) + "\t" +
         format_fixed(m.macro_precision, 4) + "\n";
}

std::vector<Prediction> run_eval(const std::vector<EvalCase>& cases, const PromptStrategy& strategy,
                                 const ChatClient& client, const std::string& model_name,
                                 const RetryPolicy& retry, int jobs) {
  strategy.validate();
  std::vector<Prediction> out(cases.size());
  parallel_for(cases.size(), jobs, [&](std::size_t i) {
    const auto prompt = build_prompt(strategy, cases[i].narrative);
    Prediction& p = out[i];
    p.caseno = cases[i].caseno;
    p.gold = cases[i].gold;
    p.raw_output = complete_with_retry(client, {prompt.system, prompt.user, 0.0, model_name}, retry);
    const auto parsed = parse_label(p.raw_output, strategy.kind);
    p.label = parsed.label;
    p.status = parsed.status;
  });
  return out;
}

std::string predictions_to_jsonl(const std::vector<Prediction>& preds) {
  std::string out;
  for (const auto& p : preds) {
    nlohmann::ordered_json j;
    j["caseno"] = p.caseno;
    j["raw_output"] = p.raw_output;
    j["label"] = p.label ? nlohmann::ordered_json(std::string(to_string(*p.label))) : nullptr;
    j["parse_status"] = std::string(to_string(p.status));
    j["gold"] = std::string(to_string(p.gold));
    out += j.dump() + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// SFT

std::string render_sft(const SftRecord& r) {
  return r.system + "\n\n" + r.user + "\n\n" + r.response;
}

std::optional<Severity> parse_label_text(std::string_view response) {
  for (auto s : {Severity::NoApparentOrMinor, Severity::SeriousOrFatal}) {
    if (label_text(s) == response) return s;
  }
  return std::nullopt;
}

namespace {

bool contains_label(std::string_view text) {
  const std::string lower = to_lower(text);
  for (auto s : {Severity::NoApparentOrMinor, Severity::SeriousOrFatal}) {
    if (lower.find(to_lower(label_text(s))) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

std::vector<SftRecord> build_sft_dataset(const std::vector<SftCase>& cases,
                                         std::string_view system_prompt) {
  std::vector<SftRecord> out;
  for (const auto& c : cases) {
    SftRecord r;
    r.caseno = c.caseno;
    r.system = std::string(system_prompt);
    r.user = c.descriptive + "\n\n" + std::string(kSftQuestion);
    r.response = std::string(label_text(c.label));
    r.mask_boundary = r.system.size() + 2 + r.user.size() + 2;
    if (contains_label(r.user)) {
      throw Error(ErrorKind::Validation, "case " + c.caseno + ": user text contains a label string");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string sft_to_jsonl(const std::vector<SftRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["caseno"] = r.caseno;
    j["system"] = r.system;
    j["user"] = r.user;
    j["response"] = r.response;
    j["mask_boundary"] = r.mask_boundary;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<SftRecord> sft_from_jsonl(std::string_view text) {
  std::vector<SftRecord> out;
  std::size_t line_no = 0;
  for (const auto& line : split(text, '\n')) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError(line_no, "not a JSON object");
    try {
      out.push_back({j.at("caseno").get<std::string>(), j.at("system").get<std::string>(),
                     j.at("user").get<std::string>(), j.at("response").get<std::string>(),
                     j.at("mask_boundary").get<std::size_t>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return out;
}

std::vector<std::string> leakage_scan(const std::vector<SftRecord>& records) {
  std::vector<std::string> bad;
  for (const auto& r : records) {
    if (contains_label(r.user)) bad.push_back(r.caseno);
  }
  return bad;
}

}  // namespace crashxai
