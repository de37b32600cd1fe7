#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "tta/corpus/features.hpp"
#include "tta/corpus/wav.hpp"
#include "tta/error.hpp"

namespace tta {

struct Segment {
  double start_s = 0.0;
  double end_s = 0.0;

  double length() const { return end_s - start_s; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

enum class SegmentLabel { speech, nonspeech };

struct SegmentList {
  std::vector<Segment> segments;
  SegmentLabel label = SegmentLabel::speech;

  double total_s() const {
    double t = 0.0;
    for (const auto& s : segments) t += s.length();
    return t;
  }
};

/// Maps a waveform to its speech segments.
using VadProvider = std::function<SegmentList(const Waveform&)>;

struct EnergyVadConfig {
  double frame_s = 0.030;
  double hop_s = 0.010;
  double absolute_floor = 1e-4;
  double median_ratio = 0.05;
  double hangover_s = 0.200;
};

/// Sorts, clips to [0, duration] and merges overlapping or touching segments.
inline std::vector<Segment> normalize_segments(std::vector<Segment> segs, double duration_s, double merge_gap_s = 0.0) {
  for (auto& s : segs) {
    s.start_s = std::clamp(s.start_s, 0.0, duration_s);
    s.end_s = std::clamp(s.end_s, 0.0, duration_s);
  }
  std::erase_if(segs, [](const Segment& s) { return !(s.end_s > s.start_s); });
  std::sort(segs.begin(), segs.end(), [](const Segment& a, const Segment& b) { return a.start_s < b.start_s; });
  std::vector<Segment> out;
  for (const auto& s : segs) {
    if (!out.empty() && s.start_s - out.back().end_s <= merge_gap_s) out.back().end_s = std::max(out.back().end_s, s.end_s);
    else out.push_back(s);
  }
  return out;
}

/// Per-frame RMS of `w` with the VAD framing. Signals shorter than one frame
/// yield a single frame over the whole signal.
inline std::vector<double> frame_rms(const Waveform& w, const EnergyVadConfig& cfg) {
  const auto len = static_cast<std::size_t>(std::lround(cfg.frame_s * w.sample_rate_hz));
  const auto hop = static_cast<std::size_t>(std::lround(cfg.hop_s * w.sample_rate_hz));
  std::vector<double> rms;
  const std::size_t frames = std::max<std::size_t>(1, frame_count(w.samples.size(), len, hop));
  const std::size_t span = std::min(len, w.samples.size());
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t i = 0; i < span; ++i) {
      const double s = w.samples[f * hop + i];
      acc += s * s;
    }
    rms.push_back(std::sqrt(acc / static_cast<double>(std::max<std::size_t>(span, 1))));
  }
  return rms;
}

inline double energy_vad_threshold(std::vector<double> rms, const EnergyVadConfig& cfg) {
  if (rms.empty()) return cfg.absolute_floor;
  const auto mid = rms.begin() + static_cast<std::ptrdiff_t>(rms.size() / 2);
  std::nth_element(rms.begin(), mid, rms.end());
  double median = *mid;
  if (rms.size() % 2 == 0) median = 0.5 * (median + *std::max_element(rms.begin(), mid));
  return std::max(cfg.absolute_floor, cfg.median_ratio * median);
}

/// Frame-energy VAD: a frame is speech when its RMS exceeds
/// max(floor, ratio * median RMS). Speech runs separated by less than the
/// hangover are merged.
inline SegmentList energy_vad(const Waveform& w, const EnergyVadConfig& cfg = {}) {
  const auto rms = frame_rms(w, cfg);
  const double threshold = energy_vad_threshold(rms, cfg);
  const double duration = w.duration_s();
  std::vector<Segment> segs;
  for (std::size_t f = 0; f < rms.size(); ++f) {
    if (rms[f] > threshold) {
      const double start = static_cast<double>(f) * cfg.hop_s;
      segs.push_back(Segment{start, std::min(duration, start + cfg.frame_s)});
    }
  }
  return SegmentList{normalize_segments(std::move(segs), duration, cfg.hangover_s), SegmentLabel::speech};
}

inline VadProvider default_vad_provider(EnergyVadConfig cfg = {}) {
  return [cfg](const Waveform& w) { return energy_vad(w, cfg); };
}

/// Complement of the provider's speech segments within [0, duration].
/// Gaps shorter than `min_segment_s` are dropped.
inline SegmentList detect_nonspeech(const Waveform& w, const VadProvider& vad = default_vad_provider(),
                                    double min_segment_s = EnergyVadConfig{}.frame_s) {
  SegmentList speech;
  try {
    speech = vad(w);
  } catch (const std::exception& e) {
    throw Error(ErrorKind::ProviderFailure, std::string("VAD provider failed: ") + e.what());
  }
  const double duration = w.duration_s();
  const auto merged = normalize_segments(speech.segments, duration);
  SegmentList out;
  out.label = SegmentLabel::nonspeech;
  double cursor = 0.0;
  auto emit = [&](double a, double b) {
    if (b - a >= min_segment_s && b > a) out.segments.push_back(Segment{a, b});
  };
  for (const auto& s : merged) {
    emit(cursor, s.start_s);
    cursor = s.end_s;
  }
  emit(cursor, duration);
  return out;
}

struct EmsEnergy {
  double value = 0.0;
  bool empty_region = false;
  std::size_t samples = 0;
};

/// Mean squared sample value over the union of `nonspeech`; 0 with
/// `empty_region` set when the union holds no samples.
inline EmsEnergy ems_energy(const Waveform& w, const SegmentList& nonspeech) {
  const auto merged = normalize_segments(nonspeech.segments, w.duration_s());
  EmsEnergy out;
  double acc = 0.0;
  const auto n = w.samples.size();
  for (const auto& s : merged) {
    const auto a = std::min(n, static_cast<std::size_t>(std::llround(s.start_s * w.sample_rate_hz)));
    const auto b = std::min(n, static_cast<std::size_t>(std::llround(s.end_s * w.sample_rate_hz)));
    for (std::size_t i = a; i < b; ++i) acc += w.samples[i] * w.samples[i];
    out.samples += b > a ? b - a : 0;
  }
  if (out.samples == 0) {
    out.empty_region = true;
    return out;
  }
  out.value = acc / static_cast<double>(out.samples);
  return out;
}

}  // namespace tta
