#pragma once

#include <string>
#include <vector>

#include "tta/error.hpp"
#include "tta/model/types.hpp"

namespace tta {

/// Per-frame argmax class indices (lowest index wins ties).
inline std::vector<int> frame_argmax(const LogitMatrix& z) {
  std::vector<int> best(static_cast<std::size_t>(z.frames()));
  for (Eigen::Index i = 0; i < z.frames(); ++i) {
    Eigen::Index arg = 0;
    z.values.row(i).maxCoeff(&arg);
    best[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  return best;
}

/// CTC best-path collapse: merge adjacent repeats, then drop blanks.
inline std::vector<int> ctc_collapse(const std::vector<int>& path, int blank_index) {
  std::vector<int> out;
  int prev = -1;
  for (int s : path) {
    if (s != prev && s != blank_index) out.push_back(s);
    prev = s;
  }
  return out;
}

/// Maps class indices to text; the word delimiter becomes a space and
/// leading, trailing or repeated spaces are dropped.
inline std::string symbols_to_text(const std::vector<int>& labels, const Vocabulary& v) {
  std::string out;
  bool pending_space = false;
  for (int s : labels) {
    if (s == v.word_delimiter) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out += v.symbols[static_cast<std::size_t>(s)];
  }
  return out;
}

inline std::string greedy_ctc_decode(const LogitMatrix& z, const Vocabulary& v) {
  if (z.classes() != v.size())
    throw Error(ErrorKind::ShapeMismatch, "logits have " + std::to_string(z.classes()) + " classes, vocabulary " +
                                              std::to_string(v.size()));
  return symbols_to_text(ctc_collapse(frame_argmax(z), v.blank_index), v);
}

}  // namespace tta
