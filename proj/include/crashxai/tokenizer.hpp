#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "crashxai/schema.hpp"

namespace crashxai {

enum class TokenizerMode { Word, Subword };

std::string_view to_string(TokenizerMode mode);

/// A token id together with the byte range of the input it came from.
/// Tokens produced from the same whitespace-delimited word share `word`.
struct TokenSpan {
  int id = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t word = 0;
};

/// Whitespace word tokenizer, or WordPiece-style greedy longest-match
/// tokenizer where continuation pieces carry a "##" prefix.
class Tokenizer {
 public:
  static constexpr std::string_view kBos = "<bos>";
  static constexpr std::string_view kEos = "<eos>";
  static constexpr std::string_view kUnk = "<unk>";
  static constexpr std::string_view kContinuation = "##";

  /// `vocabulary` lists ordinary tokens; specials and label tokens are
  /// prepended (ids 0..4) and duplicates ignored.
  Tokenizer(TokenizerMode mode, const std::vector<std::string>& vocabulary);

  /// Word mode: every word seen at least `min_count` times.
  /// Subword mode: the same whole words plus every character seen, as an
  /// initial and as a continuation piece, so unseen words split into pieces.
  static Tokenizer build(TokenizerMode mode, const std::vector<std::string>& corpus,
                         int min_count = 1);

  std::vector<TokenSpan> encode_spans(std::string_view text) const;
  std::vector<int> encode(std::string_view text) const;
  /// Words are joined with single spaces; continuation pieces attach to the
  /// previous piece.
  std::string decode(const std::vector<int>& ids) const;

  int id(std::string_view token) const;  // unk id when absent
  bool contains(std::string_view token) const;
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  TokenizerMode mode() const { return mode_; }

  int bos() const { return 0; }
  int eos() const { return 1; }
  int unk() const { return 2; }
  int label(Severity s) const { return s == Severity::NoApparentOrMinor ? 3 : 4; }
  static std::string label_token(Severity s);

  /// {"format": "crashxai-vocab", "version": 1, "mode": ..., "tokens": [...]}
  std::string to_json() const;
  static Tokenizer from_json(std::string_view text);

 private:
  void encode_word(std::string_view word, std::size_t offset, std::size_t word_index,
                   std::vector<TokenSpan>& out) const;

  TokenizerMode mode_;
  std::vector<std::string> tokens_;
  std::map<std::string, int, std::less<>> ids_;
  std::size_t longest_ = 1;
};

}  // namespace crashxai
