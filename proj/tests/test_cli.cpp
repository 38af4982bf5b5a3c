#include <fstream>
#include <string>

#include <json.hpp>

#include "doctest.h"
#include "pipeline.hpp"

#include "crashxai/cli.hpp"
#include "crashxai/error.hpp"

using namespace crashxai;
using namespace testing_support;

namespace {

const std::string kData = CRASHXAI_TEST_DATA_DIR;

void write(const fs::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

nlohmann::json read_json(const fs::path& path) { return nlohmann::json::parse(read_text_file(path.string())); }

}  // namespace

TEST_CASE("config file values resolve against the file and flags override them") {
  const auto dir = scratch_dir("cli-config");
  write(dir / "a.conf", "# settings\nL = 50\nlexicon = lex/custom.txt\ncolumn.crash.caseno = ID\n");
  auto cfg = PipelineConfig::defaults(kData);
  CHECK(cfg.L == 100);
  CHECK(cfg.display_divisor == 1.0);
  cfg.load_file((dir / "a.conf").string());
  CHECK(cfg.L == 50);
  CHECK(cfg.lexicon == (dir / "lex/custom.txt").lexically_normal().string());
  cfg.set("L", "7");
  CHECK(cfg.L == 7);
  CHECK_NOTHROW(cfg.validate());

  write(dir / "bad.conf", "colour = red\n");
  try {
    cfg.load_file((dir / "bad.conf").string());
    FAIL("expected InvalidConfig");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidConfig);
    CHECK(std::string(e.what()).find("colour") != std::string::npos);
  }
  CHECK_THROWS_AS(cfg.set("L", "ten"), Error);
  cfg.set("L", "0");
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("bundled example config loads") {
  auto cfg = PipelineConfig::defaults(kData);
  cfg.load_file(kData + "/config.example");
  CHECK(cfg.offline);
  CHECK(cfg.seed == 7);
  CHECK(cfg.lexicon == fs::path(kData + "/lexicon.txt").lexically_normal().string());
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("usage errors exit 2 and runtime errors exit 1 with JSON") {
  CHECK(run_cli({}).code == 2);
  CHECK(run_cli({"frobnicate"}).code == 2);
  CHECK(run_cli({"narrate", "--cases", "x.jsonl"}).code == 2);
  CHECK(run_cli({"--help"}).code == 0);

  const auto dir = scratch_dir("cli-errors");
  auto r = run_cli({"narrate", "--cases", (dir / "missing.jsonl").string(), "--out", (dir / "o").string()});
  CHECK(r.code == 1);
  const auto j = nlohmann::json::parse(r.err);
  CHECK(j["error"] == "Io");

  r = run_cli({"--set", "L=-3", "narrate", "--cases", "a", "--out", "b"});
  CHECK(r.code == 1);
  CHECK(nlohmann::json::parse(r.err)["error"] == "InvalidConfig");
  r = run_cli({"--set", "nokey", "narrate", "--cases", "a", "--out", "b"});
  CHECK(nlohmann::json::parse(r.err)["error"] == "InvalidConfig");
}

TEST_CASE("ingest reports counts and downsamples on request") {
  const auto dir = scratch_dir("cli-ingest");
  auto r = run_cli({"ingest", "--corpus", kData + "/corpus", "--out", (dir / "cases.jsonl").string(),
                    "--report", (dir / "report.json").string()});
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j["cases"] == 50);
  CHECK(j["rejects"] == 0);
  CHECK(j["orphan_persons"] == 1);
  CHECK(read_json(dir / "report.json")["orphan_person_details"][0]["caseno"] == "WA0000000");

  r = run_cli({"--seed", "3", "ingest", "--corpus", kData + "/corpus", "--ratio", "1", "--out",
               (dir / "balanced.jsonl").string()});
  REQUIRE(r.code == 0);
  j = nlohmann::json::parse(r.out);
  CHECK(j["cases"] == 40);
  CHECK(j["cases_before_downsampling"] == 50);
}

TEST_CASE("occlusion and Taylor attribute the same tokens with different values") {
  const auto dir = scratch_dir("cli-attribute");
  REQUIRE(run_pipeline(dir, kData) == 0);
  const std::vector<std::string> common{"--offline", "--seed", "7"};
  auto args = common;
  for (const auto& s : {"attribute", "--model", "", "--vocab", "", "--narratives", "", "--method", "taylor",
                        "--out-dir", "", "--case", ""}) {
    args.emplace_back(s);
  }
  const auto caseno = read_json(dir / "top_factors.json").begin().key();
  args[5] = (dir / "model.json").string();
  args[7] = (dir / "vocab.json").string();
  args[9] = (dir / "augmented.jsonl").string();
  args[13] = dir.string();
  args[15] = caseno;
  const auto r = run_cli(args);
  REQUIRE(r.code == 0);
  const auto occ = read_json(dir / ("attribution-" + caseno + "-occlusion.json"));
  const auto tay = read_json(dir / ("attribution-" + caseno + "-taylor.json"));
  CHECK(occ["tokens"] == tay["tokens"]);
  CHECK(occ["words"].size() == tay["words"].size());
  CHECK(occ["score_matrix"]["entries"] != tay["score_matrix"]["entries"]);
  CHECK(fs::exists(dir / "sankey.html"));
  CHECK(fs::exists(dir / ("heatmap-" + caseno + ".html")));
  CHECK(read_json(dir / "metrics.json")["n"] == 50);
}

TEST_CASE("offline eval needs a model or a stub fixture") {
  const auto dir = scratch_dir("cli-eval");
  write(dir / "n.jsonl", "");
  const auto r = run_cli({"--offline", "eval", "--narratives", (dir / "n.jsonl").string(), "--out-dir", dir.string()});
  CHECK(r.code == 1);
  CHECK(nlohmann::json::parse(r.err)["error"] == "InvalidArgument");
}
