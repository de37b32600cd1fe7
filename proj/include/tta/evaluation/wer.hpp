#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tta/error.hpp"
#include "tta/evaluation/text.hpp"

namespace tta {

struct WerCount {
  std::int64_t substitutions = 0;
  std::int64_t deletions = 0;
  std::int64_t insertions = 0;
  std::int64_t reference_words = 0;

  std::int64_t errors() const { return substitutions + deletions + insertions; }
  double rate() const {
    return reference_words > 0 ? static_cast<double>(errors()) / static_cast<double>(reference_words) : 0.0;
  }

  WerCount& operator+=(const WerCount& o) {
    substitutions += o.substitutions;
    deletions += o.deletions;
    insertions += o.insertions;
    reference_words += o.reference_words;
    return *this;
  }
  friend bool operator==(const WerCount&, const WerCount&) = default;
};

/// Minimum edit distance alignment with unit costs. When several alignments
/// share the minimum cost the backtrace prefers substitution (or match), then
/// insertion, then deletion.
inline WerCount align_words(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  std::vector<std::int64_t> cost((n + 1) * (m + 1));
  auto at = [m, &cost](std::size_t i, std::size_t j) -> std::int64_t& { return cost[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = static_cast<std::int64_t>(i);
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = static_cast<std::int64_t>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::int64_t diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i, j - 1) + 1, at(i - 1, j) + 1});
    }
  }

  WerCount out;
  out.reference_words = static_cast<std::int64_t>(n);
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (at(i, j) == at(i - 1, j - 1) + (same ? 0 : 1)) {
        if (!same) ++out.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (j > 0 && at(i, j) == at(i, j - 1) + 1) {
      ++out.insertions;
      --j;
    } else {
      ++out.deletions;
      --i;
    }
  }
  return out;
}

/// Word error counts of `hypothesis` against `reference`; both are normalized first.
inline WerCount wer(std::string_view reference, std::string_view hypothesis) {
  auto ref = tokenize(reference);
  if (ref.empty()) throw Error(ErrorKind::EmptyReference, "reference has no words after normalization");
  return align_words(ref, tokenize(hypothesis));
}

}  // namespace tta
