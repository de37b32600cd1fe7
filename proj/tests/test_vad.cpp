#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "tta/corpus/vad.hpp"

using namespace tta;

namespace {

Waveform silence_tone_silence(double lead, double tone, double tail, double amp = 0.5) {
  Waveform w;
  const auto n = [](double s) { return static_cast<std::size_t>(s * 16000); };
  w.samples.assign(n(lead), 0.0);
  for (std::size_t i = 0; i < n(tone); ++i) w.samples.push_back(amp * std::sin(2.0 * std::numbers::pi * 300.0 * i / 16000.0));
  w.samples.insert(w.samples.end(), n(tail), 0.0);
  return w;
}

void expect_well_formed(const SegmentList& s, double duration) {
  for (std::size_t i = 0; i < s.segments.size(); ++i) {
    EXPECT_LT(s.segments[i].start_s, s.segments[i].end_s);
    EXPECT_GE(s.segments[i].start_s, 0.0);
    EXPECT_LE(s.segments[i].end_s, duration + 1e-12);
    if (i) EXPECT_LE(s.segments[i - 1].end_s, s.segments[i].start_s);
  }
}

}  // namespace

TEST(DetectNonspeech, PureSilenceIsOneSegment) {
  Waveform w;
  w.samples.assign(16000, 0.0);
  const auto ns = detect_nonspeech(w);
  EXPECT_EQ(ns.label, SegmentLabel::nonspeech);
  ASSERT_EQ(ns.segments.size(), 1u);
  EXPECT_DOUBLE_EQ(ns.segments[0].start_s, 0.0);
  EXPECT_DOUBLE_EQ(ns.segments[0].end_s, 1.0);
}

TEST(DetectNonspeech, LoudToneThroughoutHasNoNonspeech) {
  EXPECT_TRUE(detect_nonspeech(silence_tone_silence(0, 1.0, 0)).segments.empty());
}

TEST(DetectNonspeech, SilenceToneSilence) {
  const auto w = silence_tone_silence(0.5, 0.5, 0.5);
  const auto ns = detect_nonspeech(w);
  ASSERT_EQ(ns.segments.size(), 2u);
  // Threshold oracle: a 30 ms frame at 10 ms hop counts as speech as soon as it overlaps the tone.
  EXPECT_NEAR(ns.segments[0].start_s, 0.0, 1e-12);
  EXPECT_NEAR(ns.segments[0].end_s, 0.48, 0.011);
  EXPECT_NEAR(ns.segments[1].start_s, 1.02, 0.011);
  EXPECT_NEAR(ns.segments[1].end_s, 1.5, 1e-12);
}

TEST(DetectNonspeech, ShortGapsMergeIntoSpeech) {
  // Two tones 100 ms apart sit within the hangover, so the gap is not non-speech.
  auto w = silence_tone_silence(0.3, 0.3, 0.1);
  const auto second = silence_tone_silence(0.0, 0.3, 0.3);
  w.samples.insert(w.samples.end(), second.samples.begin(), second.samples.end());
  EXPECT_EQ(detect_nonspeech(w).segments.size(), 2u);
}

TEST(DetectNonspeech, ProviderFailureIsWrapped) {
  Waveform w;
  w.samples.assign(100, 0.0);
  VadProvider bad = [](const Waveform&) -> SegmentList { throw std::runtime_error("model missing"); };
  try {
    detect_nonspeech(w, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ProviderFailure);
    EXPECT_NE(std::string(e.what()).find("model missing"), std::string::npos);
  }
}

TEST(DetectNonspeech, RandomSignalsStayWellFormed) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> len(0.05, 0.4);
  std::uniform_real_distribution<double> amp(0.0, 0.8);
  for (int trial = 0; trial < 30; ++trial) {
    Waveform w;
    for (int piece = 0; piece < 6; ++piece) {
      const auto p = silence_tone_silence(len(rng), len(rng), 0.0, amp(rng));
      w.samples.insert(w.samples.end(), p.samples.begin(), p.samples.end());
    }
    const auto speech = energy_vad(w);
    const auto ns = detect_nonspeech(w);
    expect_well_formed(speech, w.duration_s());
    expect_well_formed(ns, w.duration_s());
    // Speech and non-speech never overlap.
    for (const auto& a : speech.segments)
      for (const auto& b : ns.segments) EXPECT_TRUE(a.end_s <= b.start_s + 1e-12 || b.end_s <= a.start_s + 1e-12);
  }
}

TEST(EmsEnergy, ConstantHalf) {
  Waveform w;
  w.samples.assign(16000, 0.5);
  const auto e = ems_energy(w, SegmentList{{{0.25, 0.75}}, SegmentLabel::nonspeech});
  EXPECT_DOUBLE_EQ(e.value, 0.25);
  EXPECT_FALSE(e.empty_region);
  EXPECT_EQ(e.samples, 8000u);
}

TEST(EmsEnergy, ZeroRegion) {
  Waveform w;
  w.samples.assign(1600, 0.0);
  EXPECT_DOUBLE_EQ(ems_energy(w, SegmentList{{{0.0, 0.1}}, SegmentLabel::nonspeech}).value, 0.0);
}

TEST(EmsEnergy, LengthWeightedAndOrderInvariant) {
  Waveform w;
  w.samples.assign(8000, 0.5);
  w.samples.resize(16000, 0.1);
  const SegmentList ab{{{0.0, 0.25}, {0.5, 0.75}}, SegmentLabel::nonspeech};
  const SegmentList ba{{{0.5, 0.75}, {0.0, 0.25}}, SegmentLabel::nonspeech};
  EXPECT_NEAR(ems_energy(w, ab).value, 0.13, 1e-12);
  EXPECT_DOUBLE_EQ(ems_energy(w, ab).value, ems_energy(w, ba).value);
}

TEST(EmsEnergy, EmptyUnionIsFlagged) {
  Waveform w;
  w.samples.assign(100, 0.3);
  const auto e = ems_energy(w, SegmentList{{}, SegmentLabel::nonspeech});
  EXPECT_TRUE(e.empty_region);
  EXPECT_DOUBLE_EQ(e.value, 0.0);
}
