#include "crashxai/cli.hpp"

#include <charconv>
#include <filesystem>
#include <memory>
#include <ostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "crashxai/analytics.hpp"
#include "crashxai/attribution.hpp"
#include "crashxai/augment.hpp"
#include "crashxai/chat.hpp"
#include "crashxai/evalharness.hpp"
#include "crashxai/keyvalue.hpp"
#include "crashxai/narrator.hpp"
#include "crashxai/refmodel.hpp"
#include "crashxai/util.hpp"

#ifndef CRASHXAI_DATA_DIR
#define CRASHXAI_DATA_DIR "data"
#endif

namespace crashxai {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string bundled_data_dir() { return CRASHXAI_DATA_DIR; }

// ---------------------------------------------------------------------------
// configuration

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw Error(ErrorKind::InvalidConfig,
              "config key '" + key + "': expected " + want + ", got '" + value + "'");
}

long long parse_integer(const std::string& key, const std::string& value) {
  long long v = 0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || ptr != end) bad_value(key, value, "an integer");
  return v;
}

double parse_real(const std::string& key, const std::string& value) {
  double v = 0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || ptr != end) bad_value(key, value, "a number");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  const std::string v = to_lower(value);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, value, "true or false");
}

std::string resolve(const std::string& path, const std::string& base_dir) {
  if (path.empty() || base_dir.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir) / path).lexically_normal().string();
}

}  // namespace

const std::vector<std::string>& PipelineConfig::keys() {
  static const std::vector<std::string> k{
      "lexicon",     "templates", "grouping_rules",  "categories",   "exemplars",
      "stub_fixture", "L",        "b",               "display_divisor", "threshold_hi",
      "target_ratio", "temperature", "endpoint",     "model",        "offline",
      "seed",        "jobs",      "top_k",           "batch_size",   "tokenizer",
      "min_count",   "dim",       "window",          "epochs",       "learning_rate"};
  return k;
}

PipelineConfig PipelineConfig::defaults(const std::string& data_dir) {
  PipelineConfig c;
  const fs::path d(data_dir);
  c.lexicon = (d / "lexicon.txt").string();
  c.templates = (d / "templates.txt").string();
  c.grouping_rules = (d / "grouping_rules.txt").string();
  c.categories = (d / "categories.txt").string();
  c.exemplars = (d / "exemplars.json").string();
  return c;
}

void PipelineConfig::set(const std::string& key, const std::string& value, const std::string& base_dir) {
  if (key.starts_with("column.")) {
    columns.apply_override(key, value);
    return;
  }
  if (key == "lexicon") lexicon = resolve(value, base_dir);
  else if (key == "templates") templates = resolve(value, base_dir);
  else if (key == "grouping_rules") grouping_rules = resolve(value, base_dir);
  else if (key == "categories") categories = resolve(value, base_dir);
  else if (key == "exemplars") exemplars = resolve(value, base_dir);
  else if (key == "stub_fixture") stub_fixture = resolve(value, base_dir);
  else if (key == "L") L = static_cast<int>(parse_integer(key, value));
  else if (key == "b") b = static_cast<int>(parse_integer(key, value));
  else if (key == "display_divisor") display_divisor = parse_real(key, value);
  else if (key == "threshold_hi") threshold_hi = parse_real(key, value);
  else if (key == "target_ratio") target_ratio = parse_real(key, value);
  else if (key == "temperature") temperature = parse_real(key, value);
  else if (key == "endpoint") endpoint = value;
  else if (key == "model") model = value;
  else if (key == "offline") offline = parse_bool(key, value);
  else if (key == "seed") seed = static_cast<std::uint64_t>(parse_integer(key, value));
  else if (key == "jobs") jobs = static_cast<int>(parse_integer(key, value));
  else if (key == "top_k") top_k = static_cast<int>(parse_integer(key, value));
  else if (key == "batch_size") batch_size = static_cast<int>(parse_integer(key, value));
  else if (key == "tokenizer") {
    if (value == "word") tokenizer = TokenizerMode::Word;
    else if (value == "subword") tokenizer = TokenizerMode::Subword;
    else bad_value(key, value, "word or subword");
  }
  else if (key == "min_count") min_count = static_cast<int>(parse_integer(key, value));
  else if (key == "dim") dim = static_cast<int>(parse_integer(key, value));
  else if (key == "window") window = static_cast<int>(parse_integer(key, value));
  else if (key == "epochs") epochs = static_cast<int>(parse_integer(key, value));
  else if (key == "learning_rate") learning_rate = parse_real(key, value);
  else throw Error(ErrorKind::InvalidConfig, "unknown config key '" + key + "'");
}

void PipelineConfig::load_file(const std::string& path) {
  const std::string base = fs::path(path).parent_path().string();
  for (const auto& line : read_key_value_file(path)) {
    if (!line.section.empty()) {
      throw Error(ErrorKind::InvalidConfig,
                  path + ":" + std::to_string(line.line) + ": sections are not used in config files");
    }
    if (!line.has_value) {
      throw Error(ErrorKind::InvalidConfig,
                  path + ":" + std::to_string(line.line) + ": expected 'key = value'");
    }
    set(line.key, line.value, base.empty() ? "." : base);
  }
}

void PipelineConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorKind::InvalidConfig, why); };
  if (L < 1) fail("L must be at least 1");
  if (b < 0) fail("b must be non-negative");
  if (!(display_divisor > 0)) fail("display_divisor must be positive");
  if (!(threshold_hi > 0)) fail("threshold_hi must be positive");
  if (target_ratio < 0) fail("target_ratio must be non-negative");
  if (!(temperature >= 0 && temperature <= 2)) fail("temperature must be in [0, 2]");
  if (jobs < 1) fail("jobs must be at least 1");
  if (top_k < 1) fail("top_k must be at least 1");
  if (batch_size < 1) fail("batch_size must be at least 1");
  if (min_count < 1) fail("min_count must be at least 1");
  if (dim < 1 || window < 1) fail("dim and window must be positive");
  if (epochs < 0) fail("epochs must be non-negative");
  if (!(learning_rate > 0)) fail("learning_rate must be positive");
}

// ---------------------------------------------------------------------------
// stages

namespace {

/// Chat client answering classification prompts with the reference model.
class RefModelChatClient final : public ChatClient {
 public:
  RefModelChatClient(TinyLM model, Tokenizer tok) : model_(std::move(model)), tok_(std::move(tok)) {}

  std::string complete(const ChatRequest& request) const override {
    return std::string(label_text(classify(model_, tok_, request.user).label));
  }

 private:
  TinyLM model_;
  Tokenizer tok_;
};

struct Args {
  std::string crashes, segments, vehicles, persons, corpus;
  std::string cases, narratives, annotated, sft, input;
  std::string out, out_dir, report;
  std::string model_path, vocab_path, losses;
  std::string method = "occlusion";
  std::string strategy = "zs";
  std::string kind;
  std::string only_case;
};

void write_json_line(std::ostream& out, const ordered_json& j) { out << j.dump() << "\n"; }

std::unique_ptr<ChatClient> online_client(const PipelineConfig& cfg) {
  if (!cfg.endpoint.empty()) {
    const char* key = std::getenv("CRASHXAI_API_KEY");
    return std::make_unique<HttpChatClient>(cfg.endpoint, key ? key : "");
  }
  if (auto c = HttpChatClient::from_environment()) return c;
  throw Error(ErrorKind::Unavailable,
              "no chat endpoint configured; set endpoint, CRASHXAI_CHAT_ENDPOINT or use --offline");
}

std::unique_ptr<ChatClient> stub_client(const PipelineConfig& cfg) {
  if (!cfg.stub_fixture.empty()) {
    return std::make_unique<StubChatClient>(StubChatClient::from_fixture_file(cfg.stub_fixture));
  }
  return std::make_unique<StubChatClient>(StubChatClient::echo());
}

std::string case_file_name(const std::string& prefix, const std::string& caseno,
                           const std::string& suffix) {
  std::string safe;
  for (char c : caseno) safe.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_');
  return prefix + safe + suffix;
}

int cmd_ingest(const PipelineConfig& cfg, const Args& a, std::ostream& out, std::ostream& err) {
  auto pick = [&](const std::string& explicit_path, const char* name) {
    if (!explicit_path.empty()) return explicit_path;
    if (a.corpus.empty()) {
      throw Error(ErrorKind::InvalidArgument, std::string("missing --") + name + " (or --corpus)");
    }
    return (fs::path(a.corpus) / (std::string(name) + ".csv")).string();
  };
  const auto tables = load_tables(pick(a.crashes, "crashes"), pick(a.segments, "segments"),
                                  pick(a.vehicles, "vehicles"), pick(a.persons, "persons"),
                                  cfg.columns);
  auto result = integrate(tables);
  std::size_t before = result.cases.size();
  if (cfg.target_ratio > 0) {
    result.cases = stratified_downsample(result.cases, cfg.target_ratio, cfg.seed);
  }
  write_file_atomic(a.out, serialize_cases(result.cases));
  for (const auto& w : result.warnings) err << "warning: " << w << "\n";

  ordered_json summary;
  summary["command"] = "ingest";
  summary["cases"] = result.cases.size();
  summary["cases_before_downsampling"] = before;
  summary["rejects"] = tables.rejects.size();
  summary["orphan_vehicles"] = result.orphan_vehicles.size();
  summary["orphan_persons"] = result.orphan_persons.size();
  if (!a.report.empty()) {
    ordered_json rep = summary;
    ordered_json rejects = ordered_json::array();
    for (const auto& r : tables.rejects) {
      rejects.push_back({{"table", r.table}, {"line", r.line}, {"reason", r.reason}});
    }
    rep["reject_details"] = rejects;
    ordered_json ov = ordered_json::array();
    for (const auto& v : result.orphan_vehicles) ov.push_back({{"caseno", v.caseno}, {"unit_id", v.unit_id}});
    rep["orphan_vehicle_details"] = ov;
    ordered_json op = ordered_json::array();
    for (const auto& p : result.orphan_persons) op.push_back({{"caseno", p.caseno}, {"unit_id", p.unit_id}});
    rep["orphan_person_details"] = op;
    rep["warnings"] = result.warnings;
    write_file_atomic(a.report, rep.dump(1) + "\n");
  }
  write_json_line(out, summary);
  return 0;
}

int cmd_narrate(const PipelineConfig& cfg, const Args& a, std::ostream& out, std::ostream& err) {
  const auto lexicon = Lexicon::load(cfg.lexicon);
  const auto templates = load_templates(cfg.templates, lexicon);
  const auto cases = deserialize_cases_file(a.cases);
  std::vector<NarrativePair> narratives(cases.size());
  std::vector<std::vector<std::string>> warnings(cases.size());
  parallel_for(cases.size(), cfg.jobs, [&](std::size_t i) {
    const auto norm = normalize(cases[i], lexicon);
    warnings[i] = norm.warnings;
    narratives[i] = render(norm, templates);
  });
  for (std::size_t i = 0; i < cases.size(); ++i) {
    for (const auto& w : warnings[i]) err << "warning: case " << cases[i].crash.caseno << ": " << w << "\n";
  }
  write_file_atomic(a.out, narratives_to_jsonl(narratives));
  write_json_line(out, {{"command", "narrate"}, {"narratives", narratives.size()}});
  return 0;
}

int cmd_augment(const PipelineConfig& cfg, const Args& a, std::ostream& out, std::ostream&) {
  auto narratives = narratives_from_jsonl(read_text_file(a.narratives));
  const auto client = cfg.offline ? stub_client(cfg) : online_client(cfg);
  AugmentationConfig acfg;
  acfg.temperature = cfg.temperature;
  acfg.batch_size = cfg.batch_size;
  acfg.concurrency = cfg.jobs;
  acfg.model_name = cfg.model;
  std::vector<std::string> texts;
  for (const auto& n : narratives) texts.push_back(n.descriptive);
  const auto results = augment_batch(texts, *client, acfg);
  std::size_t flagged = 0;
  std::string report;
  for (std::size_t i = 0; i < narratives.size(); ++i) {
    narratives[i].descriptive = results[i].text;
    flagged += results[i].flagged ? 1 : 0;
    ordered_json r;
    r["caseno"] = narratives[i].caseno;
    r["flagged"] = results[i].flagged;
    ordered_json failed = ordered_json::array();
    for (const auto& c : results[i].report.results) {
      if (!c.passed) failed.push_back({{"constraint", std::string(to_string(c.kind))}, {"offending", c.offending}});
    }
    r["failed_constraints"] = failed;
    r["error"] = results[i].error;
    report += r.dump() + "\n";
  }
  write_file_atomic(a.out, narratives_to_jsonl(narratives));
  if (!a.report.empty()) write_file_atomic(a.report, report);
  write_json_line(out, {{"command", "augment"}, {"narratives", narratives.size()}, {"flagged", flagged}});
  return 0;
}

std::vector<SftRecord> sft_records_for(const std::vector<NarrativePair>& narratives) {
  std::vector<SftCase> cases;
  for (const auto& n : narratives) cases.push_back({n.caseno, n.descriptive, n.label});
  return build_sft_dataset(cases);
}

int cmd_build_sft(const PipelineConfig&, const Args& a, std::ostream& out, std::ostream&) {
  const auto records = sft_records_for(narratives_from_jsonl(read_text_file(a.narratives)));
  write_file_atomic(a.out, sft_to_jsonl(records));
  write_json_line(out, {{"command", "build-sft"}, {"records", records.size()}});
  return 0;
}

std::string prompt_part(const SftRecord& r) { return render_sft(r).substr(0, r.mask_boundary); }

int cmd_train_ref(const PipelineConfig& cfg, const Args& a, std::ostream& out, std::ostream&) {
  const auto records = sft_from_jsonl(read_text_file(a.sft));
  if (records.empty()) throw Error(ErrorKind::InvalidArgument, "SFT dataset is empty");
  std::vector<std::string> corpus;
  for (const auto& r : records) corpus.push_back(prompt_part(r));
  const auto tok = Tokenizer::build(cfg.tokenizer, corpus, cfg.min_count);
  std::vector<TrainingExample> examples;
  for (const auto& r : records) {
    const auto label = parse_label_text(r.response);
    if (!label) throw Error(ErrorKind::Validation, "case " + r.caseno + ": unknown response label");
    examples.push_back(make_training_example(tok, prompt_part(r), *label));
  }
  auto model = TinyLM::random(tok.size(), cfg.dim, cfg.window, cfg.seed);
  const auto result = train(std::move(model), examples, {cfg.learning_rate, cfg.epochs, cfg.seed});
  write_file_atomic(a.model_path, checkpoint_to_json(result.model));
  write_file_atomic(a.vocab_path, tok.to_json());
  ordered_json summary;
  summary["command"] = "train-ref";
  summary["examples"] = examples.size();
  summary["vocab_size"] = tok.size();
  summary["epoch_loss"] = result.epoch_loss;
  if (!a.losses.empty()) write_file_atomic(a.losses, summary.dump(1) + "\n");
  write_json_line(out, summary);
  return 0;
}

int cmd_attribute(const PipelineConfig& cfg, const Args& a, std::ostream& out, std::ostream&) {
  AttributionMethod method;
  if (a.method == "occlusion") method = AttributionMethod::Occlusion;
  else if (a.method == "taylor") method = AttributionMethod::Taylor;
  else throw Error(ErrorKind::InvalidArgument, "--method must be occlusion or taylor");

  const auto tok = Tokenizer::from_json(read_text_file(a.vocab_path));
  const auto model = checkpoint_from_json<double>(read_text_file(a.model_path));
  if (model.vocab_size() != tok.size()) {
    throw Error(ErrorKind::Validation, "model and vocabulary sizes differ");
  }
  auto narratives = narratives_from_jsonl(read_text_file(a.narratives));
  if (!a.only_case.empty()) {
    std::erase_if(narratives, [&](const auto& n) { return n.caseno != a.only_case; });
    if (narratives.empty()) throw Error(ErrorKind::InvalidArgument, "no case " + a.only_case);
  }
  const auto records = sft_records_for(narratives);
  const NormalizationConfig norm{cfg.L, cfg.b};

  std::vector<std::string> files(records.size());
  std::vector<std::string> lines(records.size());
  parallel_for(records.size(), cfg.jobs, [&](std::size_t i) {
    const auto& r = records[i];
    const auto& n = narratives[i];
    const std::string prompt = prompt_part(r);
    const auto cls = classify(model, tok, prompt);
    const auto x = prompt_context(tok, prompt);
    const auto y = label_sequence(tok, cls.label);
    const auto imp = method == AttributionMethod::Occlusion
                         ? occlusion_importance(model, x, y, {false, tok.unk()})
                         : taylor_importance(model, x, y);
    AttributionRecord rec;
    rec.caseno = r.caseno;
    rec.method = method;
    rec.norm = norm;
    rec.scores = normalize_scores(imp.values, norm);
    for (int id : imp.input_tokens) rec.tokens.push_back(tok.token(id));
    const std::size_t first_row = 1 + tok.encode(r.system).size();
    rec.words = aggregate_to_words(rec.scores, tok.encode_spans(n.descriptive), first_row,
                                   n.descriptive, cfg.display_divisor);
    files[i] = attribution_to_json(rec);
    ordered_json line;
    line["caseno"] = r.caseno;
    line["method"] = std::string(to_string(method));
    line["predicted"] = std::string(to_string(cls.label));
    line["tie"] = cls.tie;
    line["gold"] = std::string(to_string(n.label));
    line["annotated"] = annotate_narrative(n.descriptive, rec.words);
    lines[i] = line.dump() + "\n";
  });
  std::string annotated;
  for (std::size_t i = 0; i < records.size(); ++i) {
    write_file_atomic((fs::path(a.out_dir) / case_file_name("attribution-", records[i].caseno,
                                                            "-" + a.method + ".json")).string(),
                      files[i]);
    annotated += lines[i];
  }
  write_file_atomic((fs::path(a.out_dir) / ("annotated-" + a.method + ".jsonl")).string(), annotated);
  write_json_line(out, {{"command", "attribute"}, {"method", a.method}, {"cases", records.size()}});
  return 0;
}

struct AnnotatedLine {
  std::string caseno;
  std::string annotated;
};

std::vector<AnnotatedLine> read_annotated(const std::string& path) {
  std::vector<AnnotatedLine> out;
  std::size_t line_no = 0;
  for (const auto& line : split(read_text_file(path), '\n')) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("caseno") || !j.contains("annotated")) {
      throw ParseError(line_no, "expected {\"caseno\", \"annotated\"}");
    }
    out.push_back({j["caseno"].get<std::string>(), j["annotated"].get<std::string>()});
  }
  return out;
}

int cmd_analyze(const PipelineConfig& cfg, const Args& a, std::ostream& out, std::ostream&) {
  const auto lexicon = CategoryLexicon::load(cfg.categories);
  const auto rules = GroupingRules::load(cfg.grouping_rules);
  const auto input = read_annotated(a.annotated);
  std::unique_ptr<ChatClient> client;
  if (!cfg.offline) client = online_client(cfg);

  std::vector<FactorSummary> summaries(input.size());
  parallel_for(input.size(), cfg.jobs, [&](std::size_t i) {
    if (client) {
      FactorPromptConfig pcfg;
      summaries[i] = summarize_factors(input[i].caseno, input[i].annotated, *client, pcfg, lexicon);
    } else {
      summaries[i] = rule_based_factors(input[i].caseno, words_from_annotated(input[i].annotated), lexicon);
    }
  });

  std::string factors_jsonl;
  ordered_json top_json = ordered_json::object();
  std::vector<std::vector<Factor>> per_case;
  for (const auto& s : summaries) {
    factors_jsonl += factor_summary_to_json(s, -1);
    const auto top = extract_top_factors(s, static_cast<std::size_t>(cfg.top_k));
    ordered_json entry = ordered_json::object();
    for (const auto& [aspect, terms] : top) {
      ordered_json arr = ordered_json::array();
      for (const auto& t : terms) {
        arr.push_back({{"term", t.term}, {"score", t.score}, {"factor", rules.apply(t.term)}});
      }
      entry[std::string(aspect_key(aspect))] = arr;
    }
    top_json[s.caseno] = entry;
    per_case.push_back(semantic_group(to_factors(top), rules));
  }
  const auto graph = cooccurrence(per_case);
  const fs::path dir(a.out_dir);
  write_file_atomic((dir / "factors.jsonl").string(), factors_jsonl);
  write_file_atomic((dir / "top_factors.json").string(), top_json.dump(1) + "\n");
  write_file_atomic((dir / "sankey.json").string(), sankey_json(graph));
  write_json_line(out, {{"command", "analyze"},
                        {"cases", summaries.size()},
                        {"nodes", graph.nodes.size()},
                        {"links", graph.links.size()}});
  return 0;
}

int cmd_export(const PipelineConfig& cfg, const Args& a, std::ostream& out, std::ostream&) {
  const fs::path dir(a.out_dir);
  if (a.kind == "sankey") {
    const auto graph = parse_sankey_json(read_text_file(a.input));
    write_file_atomic((dir / "sankey.html").string(), sankey_html(graph));
    write_json_line(out, {{"command", "export"}, {"kind", "sankey"}, {"files", 1}});
    return 0;
  }
  if (a.kind == "heatmap") {
    const auto input = read_annotated(a.input);
    for (const auto& line : input) {
      write_file_atomic((dir / case_file_name("heatmap-", line.caseno, ".html")).string(),
                        heatmap_html(line.caseno, line.annotated, cfg.threshold_hi));
    }
    write_json_line(out, {{"command", "export"}, {"kind", "heatmap"}, {"files", input.size()}});
    return 0;
  }
  throw Error(ErrorKind::InvalidArgument, "--kind must be sankey or heatmap");
}

std::vector<Exemplar> load_exemplars(const std::string& path) {
  const auto j = nlohmann::json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_array()) throw Error(ErrorKind::Parse, path + ": expected a JSON array");
  std::vector<Exemplar> out;
  for (const auto& e : j) {
    const auto label = parse_severity(e.at("label").get<std::string>());
    if (!label) throw Error(ErrorKind::Parse, path + ": bad exemplar label");
    out.push_back({e.at("narrative").get<std::string>(), *label});
  }
  return out;
}

int cmd_eval(const PipelineConfig& cfg, const Args& a, std::ostream& out, std::ostream&) {
  const auto kind = parse_strategy(a.strategy);
  if (!kind) throw Error(ErrorKind::InvalidArgument, "--strategy must be zs, zs-cot or fs");
  PromptStrategy strategy{*kind, {}};
  if (*kind == StrategyKind::FewShot) strategy.exemplars = load_exemplars(cfg.exemplars);

  std::unique_ptr<ChatClient> client;
  if (!cfg.offline) {
    client = online_client(cfg);
  } else if (!a.model_path.empty() || !a.vocab_path.empty()) {
    if (a.model_path.empty() || a.vocab_path.empty()) {
      throw Error(ErrorKind::InvalidArgument, "--model and --vocab go together");
    }
    client = std::make_unique<RefModelChatClient>(checkpoint_from_json<double>(read_text_file(a.model_path)),
                                                  Tokenizer::from_json(read_text_file(a.vocab_path)));
  } else if (!cfg.stub_fixture.empty()) {
    client = stub_client(cfg);
  } else {
    throw Error(ErrorKind::InvalidArgument, "offline eval needs --model/--vocab or a stub_fixture");
  }

  std::vector<EvalCase> cases;
  for (const auto& n : narratives_from_jsonl(read_text_file(a.narratives))) {
    cases.push_back({n.caseno, n.descriptive, n.label});
  }
  const auto preds = run_eval(cases, strategy, *client, cfg.model, RetryPolicy{}, cfg.jobs);
  const auto metrics = compute_metrics(preds);
  const fs::path dir(a.out_dir);
  write_file_atomic((dir / "predictions.jsonl").string(), predictions_to_jsonl(preds));
  write_file_atomic((dir / "metrics.json").string(), metrics_to_json(metrics));
  out << format_metrics(metrics);
  return 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// entry point

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Explainable crash-severity analysis pipeline", "crashxai"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> settings;
  std::uint64_t seed = 0;
  int jobs = 1;
  auto* o_config = app.add_option("--config", config_path, "Config file (key = value lines)");
  auto* o_set = app.add_option("--set", settings, "Override a config key: --set key=value");
  auto* o_seed = app.add_option("--seed", seed, "Random seed");
  auto* o_offline = app.add_flag("--offline", "Use stub chat clients and the reference model");
  auto* o_jobs = app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  (void)o_config;

  Args a;
  std::map<std::string, std::string> flag_settings;
  auto setting = [&](CLI::App* sub, const std::string& flag, const std::string& key, const std::string& help) {
    sub->add_option_function<std::string>(flag, [&flag_settings, key](const std::string& v) { flag_settings[key] = v; }, help);
  };

  auto* ingest = app.add_subcommand("ingest", "Load the four CSV tables and write cases JSONL");
  ingest->add_option("--crashes", a.crashes, "Crash table CSV");
  ingest->add_option("--segments", a.segments, "Road segment table CSV");
  ingest->add_option("--vehicles", a.vehicles, "Vehicle table CSV");
  ingest->add_option("--persons", a.persons, "Person table CSV");
  ingest->add_option("--corpus", a.corpus, "Directory with crashes/segments/vehicles/persons.csv");
  ingest->add_option("--out", a.out, "Output cases JSONL")->required();
  ingest->add_option("--report", a.report, "Write rejects, orphans and warnings as JSON");
  setting(ingest, "--ratio", "target_ratio", "Majority:minority ratio after downsampling");

  auto* narrate = app.add_subcommand("narrate", "Render descriptive and outcome narratives");
  narrate->add_option("--cases", a.cases, "Cases JSONL")->required();
  narrate->add_option("--out", a.out, "Output narratives JSONL")->required();

  auto* augment_cmd = app.add_subcommand("augment", "Rewrite narratives under preservation checks");
  augment_cmd->add_option("--narratives", a.narratives, "Narratives JSONL")->required();
  augment_cmd->add_option("--out", a.out, "Output narratives JSONL")->required();
  augment_cmd->add_option("--report", a.report, "Per-case verification report JSONL");
  setting(augment_cmd, "--temperature", "temperature", "Sampling temperature");
  setting(augment_cmd, "--endpoint", "endpoint", "Chat completion URL");

  auto* sft = app.add_subcommand("build-sft", "Build the loss-masked SFT dataset");
  sft->add_option("--narratives", a.narratives, "Narratives JSONL")->required();
  sft->add_option("--out", a.out, "Output SFT JSONL")->required();

  auto* train_cmd = app.add_subcommand("train-ref", "Train the reference model on an SFT dataset");
  train_cmd->add_option("--sft", a.sft, "SFT JSONL")->required();
  train_cmd->add_option("--model-out", a.model_path, "Checkpoint output")->required();
  train_cmd->add_option("--vocab-out", a.vocab_path, "Vocabulary output")->required();
  train_cmd->add_option("--losses", a.losses, "Write per-epoch losses as JSON");
  setting(train_cmd, "--epochs", "epochs", "Training epochs");
  setting(train_cmd, "--tokenizer", "tokenizer", "word or subword");

  auto* attribute = app.add_subcommand("attribute", "Token attribution with the reference model");
  attribute->add_option("--model", a.model_path, "Checkpoint")->required();
  attribute->add_option("--vocab", a.vocab_path, "Vocabulary")->required();
  attribute->add_option("--narratives", a.narratives, "Narratives JSONL")->required();
  attribute->add_option("--method", a.method, "occlusion or taylor")
      ->check(CLI::IsMember({"occlusion", "taylor"}));
  attribute->add_option("--out-dir", a.out_dir, "Output directory")->required();
  attribute->add_option("--case", a.only_case, "Only this CASENO");
  setting(attribute, "--L", "L", "Score scale");
  setting(attribute, "--b", "b", "Score threshold");
  setting(attribute, "--display-divisor", "display_divisor", "Display score divisor");

  auto* analyze = app.add_subcommand("analyze", "Factor summaries, grouping and co-occurrence");
  analyze->add_option("--annotated", a.annotated, "Annotated narratives JSONL")->required();
  analyze->add_option("--out-dir", a.out_dir, "Output directory")->required();
  setting(analyze, "--top-k", "top_k", "Factors kept per aspect");

  auto* export_cmd = app.add_subcommand("export", "Write Sankey or heatmap HTML");
  export_cmd->add_option("--kind", a.kind, "sankey or heatmap")
      ->required()
      ->check(CLI::IsMember({"sankey", "heatmap"}));
  export_cmd->add_option("--input", a.input, "sankey.json or annotated JSONL")->required();
  export_cmd->add_option("--out-dir", a.out_dir, "Output directory")->required();
  setting(export_cmd, "--threshold-hi", "threshold_hi", "Red/green cut in display units");

  auto* eval = app.add_subcommand("eval", "Prompting baselines and metrics");
  eval->add_option("--narratives", a.narratives, "Narratives JSONL")->required();
  eval->add_option("--strategy", a.strategy, "zs, zs-cot or fs")
      ->check(CLI::IsMember({"zs", "zs-cot", "fs"}));
  eval->add_option("--out-dir", a.out_dir, "Output directory")->required();
  eval->add_option("--model", a.model_path, "Reference model checkpoint (offline)");
  eval->add_option("--vocab", a.vocab_path, "Reference model vocabulary (offline)");

  std::vector<std::string> argv_storage{"crashxai"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : argv_storage) argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    const auto subs = app.get_subcommands();
    err << "error: " << e.what() << "\n\n" << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  try {
    PipelineConfig cfg = PipelineConfig::defaults(bundled_data_dir());
    if (!config_path.empty()) cfg.load_file(config_path);
    for (const auto& [k, v] : flag_settings) cfg.set(k, v);
    for (const auto& s : settings) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw Error(ErrorKind::InvalidConfig, "--set expects key=value, got '" + s + "'");
      cfg.set(std::string(trim(s.substr(0, eq))), std::string(trim(s.substr(eq + 1))));
    }
    if (o_seed->count() > 0) cfg.seed = seed;
    if (o_offline->count() > 0) cfg.offline = true;
    if (o_jobs->count() > 0) cfg.jobs = jobs;
    (void)o_set;
    cfg.validate();

    if (ingest->parsed()) return cmd_ingest(cfg, a, out, err);
    if (narrate->parsed()) return cmd_narrate(cfg, a, out, err);
    if (augment_cmd->parsed()) return cmd_augment(cfg, a, out, err);
    if (sft->parsed()) return cmd_build_sft(cfg, a, out, err);
    if (train_cmd->parsed()) return cmd_train_ref(cfg, a, out, err);
    if (attribute->parsed()) return cmd_attribute(cfg, a, out, err);
    if (analyze->parsed()) return cmd_analyze(cfg, a, out, err);
    if (export_cmd->parsed()) return cmd_export(cfg, a, out, err);
    if (eval->parsed()) return cmd_eval(cfg, a, out, err);
    return 2;
  } catch (const Error& e) {
    err << ordered_json{{"error", std::string(to_string(e.kind()))}, {"message", e.what()}}.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << ordered_json{{"error", "Internal"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
}

}  // namespace crashxai
