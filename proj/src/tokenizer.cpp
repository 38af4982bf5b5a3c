#include "crashxai/tokenizer.hpp"

#include <cctype>

#include <json.hpp>

#include "crashxai/error.hpp"

namespace crashxai {

std::string_view to_string(TokenizerMode mode) {
  return mode == TokenizerMode::Word ? "word" : "subword";
}

std::string Tokenizer::label_token(Severity s) {
  return "<label:" + std::string(to_string(s)) + ">";
}

Tokenizer::Tokenizer(TokenizerMode mode, const std::vector<std::string>& vocabulary)
    : mode_(mode) {
  auto add = [&](std::string tok) {
    if (ids_.contains(tok)) return;
    ids_.emplace(tok, static_cast<int>(tokens_.size()));
    longest_ = std::max(longest_, tok.size());
    tokens_.push_back(std::move(tok));
  };
  add(std::string(kBos));
  add(std::string(kEos));
  add(std::string(kUnk));
  add(label_token(Severity::NoApparentOrMinor));
  add(label_token(Severity::SeriousOrFatal));
  for (const auto& t : vocabulary) {
    if (t.empty()) throw Error(ErrorKind::InvalidArgument, "empty vocabulary entry");
    add(t);
  }
}

namespace {

template <typename F>
void for_each_word(std::string_view text, F&& f) {
  std::size_t i = 0;
  std::size_t index = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) f(text.substr(start, i - start), start, index++);
  }
}

std::size_t utf8_length(std::string_view s, std::size_t pos) {
  std::size_t n = 1;
  while (pos + n < s.size() && (static_cast<unsigned char>(s[pos + n]) & 0xC0) == 0x80) ++n;
  return n;
}

}  // namespace

Tokenizer Tokenizer::build(TokenizerMode mode, const std::vector<std::string>& corpus,
                           int min_count) {
  std::map<std::string, int> counts;
  std::vector<std::string> order;
  std::vector<std::string> chars;
  std::map<std::string, bool> seen_char;
  for (const auto& text : corpus) {
    for_each_word(text, [&](std::string_view w, std::size_t, std::size_t) {
      if (counts[std::string(w)]++ == 0) order.emplace_back(w);
      if (mode != TokenizerMode::Subword) return;
      for (std::size_t p = 0; p < w.size();) {
        const std::size_t n = utf8_length(w, p);
        std::string c(w.substr(p, n));
        if (!seen_char[c]) {
          seen_char[c] = true;
          chars.push_back(c);
        }
        p += n;
      }
    });
  }
  std::vector<std::string> vocab;
  for (const auto& w : order) {
    if (counts[w] >= min_count) vocab.push_back(w);
  }
  for (const auto& c : chars) {
    vocab.push_back(c);
    vocab.push_back(std::string(kContinuation) + c);
  }
  return Tokenizer(mode, vocab);
}

void Tokenizer::encode_word(std::string_view word, std::size_t offset, std::size_t word_index,
                            std::vector<TokenSpan>& out) const {
  if (mode_ == TokenizerMode::Word) {
    out.push_back({id(word), offset, offset + word.size(), word_index});
    return;
  }
  std::size_t pos = 0;
  std::string candidate;
  while (pos < word.size()) {
    int found = -1;
    std::size_t len = std::min(longest_, word.size() - pos);
    for (; len > 0; --len) {
      candidate.assign(pos == 0 ? "" : kContinuation);
      candidate.append(word.substr(pos, len));
      auto it = ids_.find(candidate);
      if (it != ids_.end()) {
        found = it->second;
        break;
      }
    }
    if (found < 0) {
      len = utf8_length(word, pos);
      found = unk();
    }
    out.push_back({found, offset + pos, offset + pos + len, word_index});
    pos += len;
  }
}

std::vector<TokenSpan> Tokenizer::encode_spans(std::string_view text) const {
  std::vector<TokenSpan> out;
  for_each_word(text, [&](std::string_view w, std::size_t start, std::size_t index) {
    encode_word(w, start, index, out);
  });
  return out;
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& s : encode_spans(text)) ids.push_back(s.id);
  return ids;
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int i : ids) {
    const std::string& t = token(i);
    if (mode_ == TokenizerMode::Subword && t.size() > kContinuation.size() &&
        t.starts_with(kContinuation) && !out.empty()) {
      out.append(t, kContinuation.size());
      continue;
    }
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

int Tokenizer::id(std::string_view token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? unk() : it->second;
}

bool Tokenizer::contains(std::string_view token) const { return ids_.contains(token); }

const std::string& Tokenizer::token(int id) const {
  if (id < 0 || id >= size()) {
    throw Error(ErrorKind::InvalidArgument, "token id out of range: " + std::to_string(id));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::string Tokenizer::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "crashxai-vocab";
  j["version"] = 1;
  j["mode"] = std::string(to_string(mode_));
  j["tokens"] = std::vector<std::string>(tokens_.begin() + 5, tokens_.end());
  return j.dump(1) + "\n";
}

Tokenizer Tokenizer::from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object() || j.value("format", "") != "crashxai-vocab") {
    throw Error(ErrorKind::Parse, "not a crashxai vocabulary file");
  }
  if (j.value("version", 0) != 1) {
    throw Error(ErrorKind::Parse, "unsupported vocabulary version");
  }
  const std::string mode = j.value("mode", "");
  if (mode != "word" && mode != "subword") throw Error(ErrorKind::Parse, "bad tokenizer mode");
  return Tokenizer(mode == "word" ? TokenizerMode::Word : TokenizerMode::Subword,
                   j.at("tokens").get<std::vector<std::string>>());
}

}  // namespace crashxai
