#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace himes::core {

/// Lowercase, NFC-normalized text with punctuation replaced by spaces and
/// whitespace runs collapsed to one space. Idempotent.
std::string normalize_text(std::string_view raw);

/// Ordered normalized tokens. Never holds an empty token.
class TokenSequence {
 public:
  TokenSequence() = default;
  explicit TokenSequence(std::vector<std::string> tokens);

  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  bool empty() const noexcept { return tokens_.empty(); }
  const std::string& operator[](std::size_t i) const { return tokens_[i]; }
  auto begin() const noexcept { return tokens_.begin(); }
  auto end() const noexcept { return tokens_.end(); }

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;

 private:
  std::vector<std::string> tokens_;
};

/// Splits normalize_text(text) on spaces; runs of CJK ideographs, kana and
/// hangul are split into one token per character.
TokenSequence tokenize(std::string_view text);

/// Number of Unicode code points in a UTF-8 string.
std::size_t utf8_length(std::string_view text);

/// Byte offset of every code point boundary, including text.size() at the end.
std::vector<std::size_t> utf8_boundaries(std::string_view text);

}  // namespace himes::core
