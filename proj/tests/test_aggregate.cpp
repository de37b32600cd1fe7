#include <gtest/gtest.h>

#include <vector>

#include "tta/evaluation/aggregate.hpp"
#include "tta/evaluation/wer.hpp"

using namespace tta;

TEST(SpeakerWer, SingleUtterance) {
  const std::vector<WerCount> c = {{1, 1, 0, 10}};
  EXPECT_DOUBLE_EQ(speaker_wer(c), 0.2);
}

TEST(SpeakerWer, PoolsWords) {
  const std::vector<WerCount> c = {{1, 0, 0, 10}, {2, 0, 1, 10}};
  EXPECT_DOUBLE_EQ(speaker_wer(c), 0.2);
}

TEST(SpeakerWer, PooledDiffersFromUtteranceMean) {
  // 1 error in 2 words and 0 errors in 8 words.
  const std::vector<WerCount> c = {{1, 0, 0, 2}, {0, 0, 0, 8}};
  EXPECT_DOUBLE_EQ(speaker_wer(c, SpeakerPooling::pooled), 0.1);
  EXPECT_DOUBLE_EQ(speaker_wer(c, SpeakerPooling::utterance_mean), 0.25);
}

TEST(SpeakerWer, AllPerfect) {
  const std::vector<WerCount> c = {{0, 0, 0, 4}, {0, 0, 0, 7}};
  EXPECT_DOUBLE_EQ(speaker_wer(c), 0.0);
}

TEST(SpeakerWer, EmptyListThrows) {
  try {
    speaker_wer(std::vector<WerCount>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyList);
  }
}

TEST(UnweightedMean, EqualSpeakerWeight) {
  const std::vector<double> w = {0.2, 0.4};
  EXPECT_DOUBLE_EQ(unweighted_mean_wer(w), 0.3);
  EXPECT_DOUBLE_EQ(unweighted_mean_wer(std::vector<double>{0.37}), 0.37);
}

TEST(UnweightedMean, EmptyThrows) {
  EXPECT_THROW(unweighted_mean_wer(std::vector<double>{}), Error);
}

TEST(SpeakerReport, DeltaIsAdaptedMinusBaseline) {
  const auto r = make_speaker_report("s1", 0.305, 0.275, 12);
  EXPECT_NEAR(r.delta, -0.03, 1e-12);
  EXPECT_EQ(r.utterance_count, 12);
  const std::vector<SpeakerReport> reports = {r, make_speaker_report("s2", 0.1, 0.2, 3)};
  EXPECT_DOUBLE_EQ(mean_baseline_wer(reports), (0.305 + 0.1) / 2);
  EXPECT_DOUBLE_EQ(mean_adapted_wer(reports), (0.275 + 0.2) / 2);
}
