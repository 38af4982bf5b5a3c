#include <atomic>
#include <string>

#include "doctest.h"

#include "crashxai/augment.hpp"
#include "crashxai/chat.hpp"

using namespace crashxai;

namespace {

const std::string kOriginal =
    "On June 29, 2022, at 8:00 PM, a traffic accident occurred on Alternate Route 097ARi in "
    "Chelan, Washington. The crash location was at milepost 22.4. The latitude was 47.9512. "
    "The segment carried an AADT of 4,800 vehicles per day. Vehicle 1 was a 2005 "
    "Harley-Davidson Sportster vehicle.";

const std::string kParaphrase =
    "At 8:00 PM on June 29, 2022, a crash took place on Alternate Route 097ARi in Chelan, "
    "Washington, at milepost 22.4 (latitude 47.9512), a segment carrying 4,800 vehicles per "
    "day. Vehicle 1, a 2005 Harley-Davidson Sportster, was involved.";

const ConstraintResult& result(const ConstraintReport& r, ConstraintKind k) {
  const auto* c = r.find(k);
  REQUIRE(c != nullptr);
  return *c;
}

AugmentationConfig fast_config() {
  AugmentationConfig cfg;
  cfg.retry.base_delay = std::chrono::milliseconds(1);
  cfg.retry.max_delay = std::chrono::milliseconds(2);
  return cfg;
}

}  // namespace

TEST_CASE("temporal extraction normalizes dates and times") {
  const auto t = extract_temporal("On June 29, 2022, at 8:00 PM and 2022-07-01 at 14:05, then 7/2/2022.");
  REQUIRE(t.size() == 5);
  CHECK(t[0].normalized == "2022-06-29");
  CHECK(t[0].surface == "June 29, 2022");
  CHECK(t[1].normalized == "20:00");
  CHECK(t[2].normalized == "2022-07-01");
  CHECK(t[3].normalized == "14:05");
  CHECK(t[4].normalized == "2022-07-02");
}

TEST_CASE("number extraction") {
  const auto n = extract_numbers("milepost 22.4, AADT 4,800, route 097ARi, latitude -120.0151.");
  CHECK(std::find(n.begin(), n.end(), "22.4") != n.end());
  CHECK(std::find(n.begin(), n.end(), "4800") != n.end());
  CHECK(std::find(n.begin(), n.end(), "097ARi") != n.end());
  CHECK(std::find(n.begin(), n.end(), "120.0151") != n.end());
}

TEST_CASE("proper noun extraction") {
  const auto p = extract_proper_nouns(kOriginal);
  CHECK(std::find(p.begin(), p.end(), "Alternate Route 097ARi") != p.end());
  CHECK(std::find(p.begin(), p.end(), "Harley-Davidson Sportster") != p.end());
  for (const auto& e : p) CHECK(e.rfind("The ", 0) != 0);
}

TEST_CASE("a faithful paraphrase passes every constraint") {
  const auto r = verify_preservation(kOriginal, kParaphrase, default_constraints());
  for (const auto& c : r.results) {
    INFO(to_string(c.kind));
    CHECK(c.passed);
  }
  CHECK(r.passed());
}

TEST_CASE("dropping the date violates DatesTimesPreserved") {
  std::string bad = kParaphrase;
  bad.replace(bad.find("on June 29, 2022"), 16, "that evening");
  const auto r = verify_preservation(kOriginal, bad, default_constraints());
  CHECK_FALSE(r.passed());
  CHECK_FALSE(result(r, ConstraintKind::DatesTimesPreserved).passed);
}

TEST_CASE("a missing coordinate is listed by NumbersPreserved") {
  std::string bad = kParaphrase;
  bad.replace(bad.find(" (latitude 47.9512)"), 19, "");
  const auto report = verify_preservation(kOriginal, bad, default_constraints());
  const auto& n = result(report, ConstraintKind::NumbersPreserved);
  CHECK_FALSE(n.passed);
  CHECK(n.offending == std::vector<std::string>{"47.9512"});
}

TEST_CASE("injected null markers and renamed places are caught") {
  const auto r = verify_preservation(kOriginal, kParaphrase + " The weather was unknown.",
                                     default_constraints());
  CHECK(result(r, ConstraintKind::NoNullMarkers).offending == std::vector<std::string>{"unknown"});

  std::string renamed = kParaphrase;
  renamed.replace(renamed.find("Alternate Route"), 15, "State Route");
  CHECK_FALSE(result(verify_preservation(kOriginal, renamed, default_constraints()),
                     ConstraintKind::ProperNounsPreserved).passed);
}

TEST_CASE("reordered events violate ChronologyPreserved") {
  const std::string orig = "At 8:00 PM the car stopped. At 8:15 PM the ambulance arrived.";
  const std::string swapped = "At 8:15 PM the ambulance arrived. At 8:00 PM the car stopped.";
  const auto r = verify_preservation(orig, swapped, default_constraints());
  CHECK_FALSE(result(r, ConstraintKind::ChronologyPreserved).passed);
  CHECK(result(r, ConstraintKind::DatesTimesPreserved).passed);
}

TEST_CASE("augment passes the narrative and guidelines to the client") {
  std::string seen_system, seen_user;
  double seen_temperature = -1;
  StubChatClient client([&](const ChatRequest& r) {
    seen_system = r.system;
    seen_user = r.user;
    seen_temperature = r.temperature;
    return kParaphrase;
  });
  const auto cfg = fast_config();
  CHECK(augment(kOriginal, client, cfg) == kParaphrase);
  CHECK(seen_user == kOriginal);
  CHECK(seen_system == augmentation_system_message(cfg));
  CHECK(seen_system.rfind(cfg.system_prompt, 0) == 0);
  CHECK(seen_temperature == doctest::Approx(0.1));
}

TEST_CASE("augment rejects empty input and blank completions") {
  const auto cfg = fast_config();
  CHECK_THROWS_AS(augment("", StubChatClient::echo(), cfg), Error);
  try {
    augment(kOriginal, StubChatClient([](const ChatRequest&) { return std::string("  \n"); }), cfg);
    FAIL("expected EmptyCompletion");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyCompletion);
  }
}

TEST_CASE("config validation") {
  auto cfg = fast_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.temperature = 2.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = fast_config();
  cfg.constraints.clear();
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = fast_config();
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("augment_batch keeps order and falls back on failures") {
  const std::vector<std::string> inputs{kOriginal, "At 9:10 AM on May 2, 2021, a car stopped.",
                                        "Vehicle 2 was a 2011 Kenworth T680 vehicle."};
  StubChatClient client([&](const ChatRequest& r) -> std::string {
    if (r.user == inputs[0]) return kParaphrase;
    if (r.user == inputs[1]) return "A car stopped one morning.";
    throw TransientError("connection reset");
  });
  auto cfg = fast_config();
  cfg.batch_size = 2;
  cfg.concurrency = 2;
  cfg.retry.max_attempts = 2;
  const auto out = augment_batch(inputs, client, cfg);
  REQUIRE(out.size() == 3);
  CHECK(out[0].text == kParaphrase);
  CHECK_FALSE(out[0].flagged);
  CHECK(out[1].text == inputs[1]);
  CHECK(out[1].flagged);
  CHECK(out[2].text == inputs[2]);
  CHECK(out[2].flagged);
  CHECK_FALSE(out[2].error.empty());
}

TEST_CASE("retry backs off on transient errors then succeeds") {
  std::atomic<int> calls{0};
  StubChatClient flaky([&](const ChatRequest&) -> std::string {
    if (++calls < 3) throw TransientError("503");
    return "ok";
  });
  RetryPolicy p;
  p.base_delay = std::chrono::milliseconds(1);
  CHECK(complete_with_retry(flaky, {}, p) == "ok");
  CHECK(calls == 3);

  calls = 0;
  p.max_attempts = 2;
  StubChatClient down([&](const ChatRequest&) -> std::string {
    ++calls;
    throw TransientError("503");
  });
  try {
    complete_with_retry(down, {}, p);
    FAIL("expected Unavailable");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Unavailable);
  }
  CHECK(calls == 2);
}

TEST_CASE("chat wire format") {
  const auto body = chat_request_body({"sys", "hello \"there\"", 0.1, "m"});
  CHECK(body == R"({"model":"m","temperature":0.1,"messages":[{"role":"system","content":"sys"},)"
                R"({"role":"user","content":"hello \"there\""}]})");
  CHECK(parse_chat_response(R"({"choices":[{"message":{"role":"assistant","content":"hi"}}]})") == "hi");
  CHECK_THROWS_AS(parse_chat_response("{}"), Error);
  const auto table = StubChatClient::from_table({{"a", "b"}});
  CHECK(table.complete({"", "a", 0, ""}) == "b");
  CHECK(table.complete({"", "z", 0, ""}) == "z");
}
