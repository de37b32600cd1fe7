#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "tta/corpus/features.hpp"
#include "tta/corpus/wav.hpp"
#include "tta/error.hpp"
#include "tta/evaluation/text.hpp"
#include "tta/model/types.hpp"

namespace tta {

/// Procedural "feature audio": every non-blank vocabulary symbol is rendered
/// as a pair of sinusoids placed on mel filter centres, separated by short
/// silences. Transcripts are drawn from a fixed lexicon, so the frame-level
/// alignment of every rendered utterance is known exactly.
struct DeskCorpusConfig {
  int sample_rate_hz = kCanonicalSampleRate;
  int mel_bins = 20;  // must match the model's feature_dim for tones to sit on filter centres
  std::vector<std::string> lexicon = {
      "THE", "CAT", "SAT", "ON", "MAT", "DOG", "RAN", "FAST", "BIG", "RED", "SUN", "IS", "HOT", "WE", "SEE",
      "A", "BOX", "OF", "JAM", "QUIZ", "VAN", "ZIP", "YES", "NO", "KID", "WHY", "GLOW", "PLAY", "DON'T", "IT'S"};
  int min_words = 2;
  int max_words = 4;
  double lead_s = 0.15;
  double char_min_s = 0.09;
  double char_max_s = 0.13;
  double gap_min_s = 0.06;
  double gap_max_s = 0.09;
  double tone_amplitude = 0.25;
};

struct LabeledSpan {
  std::size_t start = 0;  // samples, half-open
  std::size_t end = 0;
  int symbol = 0;
};

struct RenderedUtterance {
  Waveform audio;
  std::string transcript;
  std::vector<LabeledSpan> spans;
};

/// Low and high mel-bin indices used for each symbol's tone pair.
inline std::pair<int, int> tone_bins(int symbol_index, int n_symbols_rendered, int mel_bins) {
  static constexpr int lows[] = {2, 3, 4, 5, 6, 7, 8};
  static constexpr int highs[] = {11, 13, 15, 17};
  if (mel_bins < 18 || n_symbols_rendered > 28) throw Error(ErrorKind::InvalidConfig, "tone alphabet needs >= 18 mel bins");
  return {lows[symbol_index % 7], highs[symbol_index / 7]};
}

class DeskCorpus {
 public:
  DeskCorpus(DeskCorpusConfig cfg, Vocabulary vocab) : cfg_(std::move(cfg)), vocab_(std::move(vocab)) {
    for (int s = 0; s < vocab_.size(); ++s) {
      if (s == vocab_.blank_index) continue;
      rendered_.push_back(s);
    }
  }

  const DeskCorpusConfig& config() const { return cfg_; }
  const Vocabulary& vocabulary() const { return vocab_; }

  std::string random_transcript(std::mt19937_64& rng) const {
    std::uniform_int_distribution<int> n_words(cfg_.min_words, cfg_.max_words);
    std::uniform_int_distribution<std::size_t> pick(0, cfg_.lexicon.size() - 1);
    std::string text;
    const int n = n_words(rng);
    for (int i = 0; i < n; ++i) {
      if (i) text += ' ';
      text += cfg_.lexicon[pick(rng)];
    }
    return text;
  }

  /// Clean rendering of `transcript` (normalized first) with a small
  /// random timing jitter per symbol.
  RenderedUtterance render(const std::string& transcript, std::mt19937_64& rng) const {
    const std::string text = normalize_text(transcript);
    std::vector<int> symbols;
    for (char ch : text) {
      const int idx = ch == ' ' ? vocab_.word_delimiter : vocab_.index_of(std::string(1, ch));
      if (idx < 0) throw Error(ErrorKind::InvalidConfig, std::string("symbol not in vocabulary: ") + ch);
      symbols.push_back(idx);
    }
    std::uniform_real_distribution<double> char_len(cfg_.char_min_s, cfg_.char_max_s);
    std::uniform_real_distribution<double> gap_len(cfg_.gap_min_s, cfg_.gap_max_s);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    const double sr = cfg_.sample_rate_hz;

    RenderedUtterance out;
    out.transcript = text;
    auto& samples = out.audio.samples;
    out.audio.sample_rate_hz = cfg_.sample_rate_hz;
    samples.assign(static_cast<std::size_t>(cfg_.lead_s * sr), 0.0);
    for (int s : symbols) {
      const auto len = static_cast<std::size_t>(char_len(rng) * sr);
      const auto [lo, hi] = tone_bins(rendered_index(s), static_cast<int>(rendered_.size()), cfg_.mel_bins);
      const double f1 = mel_center_hz(lo, cfg_.mel_bins, cfg_.sample_rate_hz);
      const double f2 = mel_center_hz(hi, cfg_.mel_bins, cfg_.sample_rate_hz);
      const double ph1 = phase(rng);
      const double ph2 = phase(rng);
      const std::size_t start = samples.size();
      const auto ramp = static_cast<std::size_t>(0.005 * sr);
      for (std::size_t i = 0; i < len; ++i) {
        const double t = static_cast<double>(i) / sr;
        double env = 1.0;
        if (i < ramp) env = static_cast<double>(i) / ramp;
        else if (len - i < ramp) env = static_cast<double>(len - i) / ramp;
        samples.push_back(cfg_.tone_amplitude * env *
                          (std::sin(2.0 * std::numbers::pi * f1 * t + ph1) + std::sin(2.0 * std::numbers::pi * f2 * t + ph2)));
      }
      out.spans.push_back(LabeledSpan{start, samples.size(), s});
      samples.insert(samples.end(), static_cast<std::size_t>(gap_len(rng) * sr), 0.0);
    }
    samples.insert(samples.end(), static_cast<std::size_t>(cfg_.lead_s * sr), 0.0);
    return out;
  }

 private:
  int rendered_index(int symbol) const {
    for (std::size_t i = 0; i < rendered_.size(); ++i)
      if (rendered_[i] == symbol) return static_cast<int>(i);
    return 0;
  }

  DeskCorpusConfig cfg_;
  Vocabulary vocab_;
  std::vector<int> rendered_;
};

inline double rms(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return x.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(x.size()));
}

/// Domain shift of one synthetic speaker: the clean signal is scaled by
/// `gain_db` and white Gaussian noise is added at `snr_db` relative to the
/// scaled signal's RMS.
struct SpeakerShift {
  double snr_db = 40.0;
  double gain_db = 0.0;

  /// Larger means noisier.
  double noise_level_db() const { return -snr_db; }
};

inline Waveform apply_shift(const Waveform& clean, const SpeakerShift& shift, std::mt19937_64& rng) {
  Waveform out = clean;
  const double gain = std::pow(10.0, shift.gain_db / 20.0);
  for (auto& s : out.samples) s *= gain;
  const double noise_rms = rms(out.samples) / std::pow(10.0, shift.snr_db / 20.0);
  std::normal_distribution<double> noise(0.0, noise_rms);
  for (auto& s : out.samples) s = std::clamp(s + noise(rng), -1.0, 1.0);
  return out;
}

}  // namespace tta
