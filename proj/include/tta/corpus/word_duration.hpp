#pragma once

#include "tta/corpus/manifest.hpp"
#include "tta/error.hpp"
#include "tta/evaluation/text.hpp"

namespace tta {

/// Seconds per transcript word, using the same normalizer as WER scoring.
inline double word_duration(const Utterance& u) {
  const auto words = tokenize(u.transcript);
  if (words.empty()) throw Error(ErrorKind::EmptyTranscript, "utterance '" + u.utterance_id + "' has no words");
  return u.duration_s / static_cast<double>(words.size());
}

}  // namespace tta
