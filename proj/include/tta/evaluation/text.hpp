#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace tta {

namespace detail {

inline bool is_word_byte(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

}  // namespace detail

/// Uppercases ASCII letters, replaces punctuation with whitespace (keeping
/// apostrophes that sit between two word characters) and collapses runs of
/// whitespace to a single space. Non-ASCII bytes are kept verbatim.
inline std::string normalize_text(std::string_view s) {
  std::string spaced;
  spaced.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (detail::is_word_byte(c)) {
      spaced.push_back(static_cast<char>(std::toupper(c)));
    } else if (c == '\'' && i > 0 && i + 1 < s.size() &&
               detail::is_word_byte(static_cast<unsigned char>(s[i - 1])) &&
               detail::is_word_byte(static_cast<unsigned char>(s[i + 1]))) {
      spaced.push_back('\'');
    } else {
      spaced.push_back(' ');
    }
  }

  std::string out;
  out.reserve(spaced.size());
  bool pending_space = false;
  for (char c : spaced) {
    if (c == ' ') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

/// Splits already-normalized text on single spaces.
inline std::vector<std::string> split_words(std::string_view normalized) {
  std::vector<std::string> words;
  std::size_t start = 0;
  while (start < normalized.size()) {
    auto end = normalized.find(' ', start);
    if (end == std::string_view::npos) end = normalized.size();
    if (end > start) words.emplace_back(normalized.substr(start, end - start));
    start = end + 1;
  }
  return words;
}

inline std::vector<std::string> tokenize(std::string_view raw) { return split_words(normalize_text(raw)); }

}  // namespace tta
