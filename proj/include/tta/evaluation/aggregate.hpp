#pragma once

#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "tta/error.hpp"
#include "tta/evaluation/wer.hpp"

namespace tta {

/// Per-speaker baseline/adapted comparison; one row of the gain heatmap data.
struct SpeakerReport {
  std::string speaker_id;
  double baseline_wer = 0.0;
  double adapted_wer = 0.0;
  double delta = 0.0;  // adapted - baseline
  int utterance_count = 0;
};

inline SpeakerReport make_speaker_report(std::string speaker_id, double baseline, double adapted,
                                         int utterance_count) {
  return SpeakerReport{std::move(speaker_id), baseline, adapted, adapted - baseline, utterance_count};
}

enum class SpeakerPooling { pooled, utterance_mean };

/// Word-pooled WER over one speaker's utterances. `utterance_mean` averages
/// per-utterance rates instead, for sensitivity analysis.
inline double speaker_wer(std::span<const WerCount> counts, SpeakerPooling pooling = SpeakerPooling::pooled) {
  if (counts.empty()) throw Error(ErrorKind::EmptyList, "speaker_wer needs at least one utterance");
  if (pooling == SpeakerPooling::utterance_mean) {
    double sum = 0.0;
    for (const auto& c : counts) sum += c.rate();
    return sum / static_cast<double>(counts.size());
  }
  WerCount total;
  for (const auto& c : counts) total += c;
  if (total.reference_words == 0) throw Error(ErrorKind::EmptyReference, "speaker has no reference words");
  return total.rate();
}

/// Every speaker weighs the same regardless of how many utterances it has.
inline double unweighted_mean_wer(std::span<const double> speaker_wers) {
  if (speaker_wers.empty()) throw Error(ErrorKind::EmptyList, "unweighted_mean_wer needs at least one speaker");
  return std::accumulate(speaker_wers.begin(), speaker_wers.end(), 0.0) / static_cast<double>(speaker_wers.size());
}

inline double mean_baseline_wer(std::span<const SpeakerReport> reports) {
  std::vector<double> v;
  for (const auto& r : reports) v.push_back(r.baseline_wer);
  return unweighted_mean_wer(v);
}

inline double mean_adapted_wer(std::span<const SpeakerReport> reports) {
  std::vector<double> v;
  for (const auto& r : reports) v.push_back(r.adapted_wer);
  return unweighted_mean_wer(v);
}

}  // namespace tta
