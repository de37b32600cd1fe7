#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "tta/error.hpp"
#include "tta/util/ranks.hpp"

namespace tta {

enum class Direction { adapted_lower, adapted_higher, no_change };

inline const char* to_string(Direction d) {
  switch (d) {
    case Direction::adapted_lower: return "adapted_lower";
    case Direction::adapted_higher: return "adapted_higher";
    case Direction::no_change: return "no_change";
  }
  return "no_change";
}

struct PairedTestResult {
  double statistic = 0.0;  // min(W+, W-)
  double w_plus = 0.0;     // rank sum of positive (adapted - baseline) differences
  double w_minus = 0.0;
  double p_value = 1.0;
  int n_effective = 0;
  bool exact = false;
  Direction direction = Direction::no_change;
};

inline constexpr int kWilcoxonExactMaxN = 25;

/// Two-sided Wilcoxon signed-rank test on paired samples. Zero differences are
/// dropped. Up to 25 non-zero pairs the null distribution of W+ is enumerated
/// exactly (conditional on tied mid-ranks); beyond that a tie-corrected normal
/// approximation with continuity correction is used.
inline PairedTestResult wilcoxon_signed_rank(std::span<const double> baseline, std::span<const double> adapted) {
  if (baseline.size() != adapted.size())
    throw Error(ErrorKind::LengthMismatch, "baseline and adapted samples differ in length");

  std::vector<double> diffs;
  for (std::size_t i = 0; i < baseline.size(); ++i) {
    const double d = adapted[i] - baseline[i];
    if (d != 0.0) diffs.push_back(d);
  }
  if (diffs.empty() && !baseline.empty()) throw Error(ErrorKind::AllZeroDifferences, "all paired differences are zero");
  if (diffs.size() < 5)
    throw Error(ErrorKind::TooFewPairs, "need at least 5 non-zero differences, got " + std::to_string(diffs.size()));

  std::vector<double> magnitudes(diffs.size());
  std::transform(diffs.begin(), diffs.end(), magnitudes.begin(), [](double d) { return std::abs(d); });
  const auto ranks = mid_ranks(magnitudes);

  PairedTestResult out;
  out.n_effective = static_cast<int>(diffs.size());
  for (std::size_t i = 0; i < diffs.size(); ++i) (diffs[i] > 0 ? out.w_plus : out.w_minus) += ranks[i];
  out.statistic = std::min(out.w_plus, out.w_minus);
  out.direction = out.w_plus > out.w_minus   ? Direction::adapted_higher
                  : out.w_plus < out.w_minus ? Direction::adapted_lower
                                             : Direction::no_change;

  const auto n = static_cast<std::size_t>(out.n_effective);
  if (out.n_effective <= kWilcoxonExactMaxN) {
    // Doubled mid-ranks are integers, so W+ lives on an integer lattice.
    std::vector<std::int64_t> doubled(n);
    std::int64_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      doubled[i] = std::llround(2.0 * ranks[i]);
      total += doubled[i];
    }
    std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
    counts[0] = 1.0;
    std::int64_t reach = 0;
    for (auto r : doubled) {
      for (std::int64_t s = reach; s >= 0; --s) counts[static_cast<std::size_t>(s + r)] += counts[static_cast<std::size_t>(s)];
      reach += r;
    }
    const auto w2 = std::llround(2.0 * out.w_plus);
    double lower = 0.0;
    double upper = 0.0;
    for (std::int64_t s = 0; s <= total; ++s) {
      if (s <= w2) lower += counts[static_cast<std::size_t>(s)];
      if (s >= w2) upper += counts[static_cast<std::size_t>(s)];
    }
    const double all = std::ldexp(1.0, out.n_effective);
    out.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / all);
    out.exact = true;
  } else {
    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    double tie_term = 0.0;
    auto sorted = magnitudes;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
      std::size_t j = i;
      while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i);
      tie_term += t * t * t - t;
      i = j;
    }
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    const double dev = std::max(0.0, std::abs(out.w_plus - mean) - 0.5);
    const boost::math::normal_distribution<double> unit;
    out.p_value = var > 0.0 ? std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(unit, dev / std::sqrt(var))))
                            : 1.0;
    out.exact = false;
  }
  return out;
}

}  // namespace tta
