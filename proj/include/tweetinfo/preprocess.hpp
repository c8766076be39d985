#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "tweetinfo/embeddings.hpp"
#include "tweetinfo/errors.hpp"

namespace tweetinfo {

inline constexpr std::size_t kDefaultMaxLength = 512;

namespace detail {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline bool is_ascii_lower_alnum(char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
}

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

/// Word characters for tokenization: ASCII letters, digits, '_' and every
/// non-ASCII byte (UTF-8 text and emoji pass through unsplit).
inline bool is_word_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || is_digit(c) || c == '_';
}

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

/// Drops "@handle" runs ("@user" is the corpus placeholder). A bare '@' stays.
inline std::string remove_mentions(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    if (s[i] == '@' && i + 1 < s.size() && is_ascii_lower_alnum(s[i + 1])) {
      ++i;
      while (i < s.size() && is_ascii_lower_alnum(s[i])) ++i;
      continue;
    }
    out += s[i++];
  }
  return out;
}

/// Drops everything from "http://", "https://" or "www." up to the next
/// whitespace.
inline std::string remove_raw_urls(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    const auto rest = s.substr(i);
    if (rest.starts_with("http://") || rest.starts_with("https://") || rest.starts_with("www.")) {
      while (i < s.size() && !is_space(s[i])) ++i;
      continue;
    }
    out += s[i++];
  }
  return out;
}

inline std::string remove_all(std::string_view s, std::string_view needle) {
  std::string out(s);
  for (auto pos = out.find(needle); pos != std::string::npos; pos = out.find(needle, pos))
    out.erase(pos, needle.size());
  return out;
}

inline std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += c;
  }
  return out;
}

}  // namespace detail

/// Lowercases (ASCII), then removes user mentions and URLs (both the
/// "@USER"/"HTTPURL" placeholders and raw forms), collapses whitespace and
/// trims. Removals repeat until nothing changes, so the result is a fixed
/// point: normalize(normalize(x)) == normalize(x).
inline std::string normalize(std::string_view text) {
  std::string s = detail::ascii_lower(text);
  while (true) {
    std::string next = detail::remove_mentions(s);
    next = detail::remove_raw_urls(next);
    next = detail::remove_all(next, "httpurl");
    if (next == s) break;
    s = std::move(next);
  }
  return detail::collapse_whitespace(s);
}

/// Whitespace split, then punctuation split. Each ASCII punctuation mark is
/// its own token except that '#' stays attached to a following word
/// (hashtags) and '.'/',' between digits stay inside numbers ("1,000").
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string word;
  const auto flush = [&] {
    if (!word.empty()) tokens.push_back(std::move(word));
    word.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (detail::is_space(c)) {
      flush();
    } else if (detail::is_word_char(c)) {
      word += c;
    } else if (c == '#' && word.empty() && i + 1 < text.size() && detail::is_word_char(text[i + 1])) {
      word += c;
    } else if ((c == '.' || c == ',') && !word.empty() && detail::is_digit(word.back()) &&
               i + 1 < text.size() && detail::is_digit(text[i + 1])) {
      word += c;
    } else {
      flush();
      tokens.emplace_back(1, c);
    }
  }
  flush();
  return tokens;
}

/// Index-encoded tweet, right-padded with PAD or clipped to max_length.
struct TokenSequence {
  std::vector<TokenId> tokens;
  std::size_t original_length = 0;
  std::size_t max_length = kDefaultMaxLength;
  /// Positions (after clipping) that fell back to UNK.
  std::size_t unknown_count = 0;

  /// Number of leading non-PAD positions.
  std::size_t length() const { return original_length < max_length ? original_length : max_length; }
};

inline TokenSequence encode(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                            std::size_t max_length = kDefaultMaxLength) {
  if (max_length == 0) throw UsageError("max_length must be >= 1");
  TokenSequence seq;
  seq.max_length = max_length;
  seq.original_length = tokens.size();
  seq.tokens.assign(max_length, kPadId);
  const std::size_t n = std::min(tokens.size(), max_length);
  for (std::size_t i = 0; i < n; ++i) {
    seq.tokens[i] = vocab.lookup(tokens[i]);
    if (seq.tokens[i] == kUnkId) ++seq.unknown_count;
  }
  return seq;
}

inline TokenSequence encode(const std::vector<std::string>& tokens, const EmbeddingTable& table,
                            std::size_t max_length = kDefaultMaxLength) {
  return encode(tokens, table.vocab(), max_length);
}

/// Full text pipeline: normalize -> tokenize -> encode.
inline TokenSequence encode_text(std::string_view raw, const Vocabulary& vocab,
                                 std::size_t max_length = kDefaultMaxLength) {
  return encode(tokenize(normalize(raw)), vocab, max_length);
}

}  // namespace tweetinfo
