#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "tta/error.hpp"
#include "tta/evaluation/aggregate.hpp"
#include "tta/util/ranks.hpp"

namespace tta {

struct CorrelationResult {
  double r = 0.0;
  double p_value = 1.0;
  int n = 0;
};

enum class CorrelationPValue { t_approximation, permutation };

struct SpearmanOptions {
  CorrelationPValue p_method = CorrelationPValue::t_approximation;
  int permutations = 20000;  // Monte Carlo draws when n is too large to enumerate
  std::uint64_t seed = 0;
};

inline double pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorKind::ZeroVariance, "correlation input has zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Two-sided p of a correlation r over n pairs via Student's t with n-2 df.
inline double correlation_t_pvalue(double r, int n) {
  if (n <= 2) return 1.0;
  if (std::abs(r) >= 1.0) return 0.0;
  const double df = n - 2.0;
  const double t = r * std::sqrt(df / (1.0 - r * r));
  const boost::math::students_t_distribution<double> dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

/// Spearman rank correlation: Pearson correlation of mid-ranks.
inline CorrelationResult spearman(std::span<const double> x, std::span<const double> y, const SpearmanOptions& opt = {}) {
  if (x.size() != y.size()) throw Error(ErrorKind::LengthMismatch, "spearman inputs differ in length");
  if (x.size() < 4) throw Error(ErrorKind::TooFewPoints, "spearman needs at least 4 pairs");
  const auto rx = mid_ranks(x);
  const auto ry = mid_ranks(y);
  CorrelationResult out;
  out.n = static_cast<int>(x.size());
  out.r = pearson(rx, ry);
  if (opt.p_method == CorrelationPValue::t_approximation) {
    out.p_value = correlation_t_pvalue(out.r, out.n);
    return out;
  }
  // Permutation null: shuffle y-ranks against fixed x-ranks.
  const double observed = std::abs(out.r) - 1e-12;
  std::vector<double> perm = ry;
  std::size_t extreme = 0;
  std::size_t total = 0;
  if (x.size() <= 8) {
    std::sort(perm.begin(), perm.end());
    do {
      ++total;
      if (std::abs(pearson(rx, perm)) >= observed) ++extreme;
    } while (std::next_permutation(perm.begin(), perm.end()));
    out.p_value = static_cast<double>(extreme) / static_cast<double>(total);
  } else {
    std::mt19937_64 rng(opt.seed);
    for (int i = 0; i < opt.permutations; ++i) {
      std::shuffle(perm.begin(), perm.end(), rng);
      if (std::abs(pearson(rx, perm)) >= observed) ++extreme;
    }
    out.p_value = (static_cast<double>(extreme) + 1.0) / (opt.permutations + 1.0);
  }
  return out;
}

struct HbDecision {
  std::vector<double> raw_p;
  std::vector<double> adjusted_p;
  std::vector<bool> reject;
  double alpha = 0.05;
};

/// Holm's step-down procedure: with p sorted ascending,
/// adjusted_(i) = min(1, max_{j<=i} (m - j + 1) p_(j)); reject where adjusted < alpha.
/// Results are reported in input order.
inline HbDecision holm_bonferroni(std::span<const double> p_values, double alpha = 0.05) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::InvalidP, "alpha must lie in (0, 1)");
  for (double p : p_values)
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::InvalidP, "p-values must lie in [0, 1]");
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });

  HbDecision out;
  out.alpha = alpha;
  out.raw_p.assign(p_values.begin(), p_values.end());
  out.adjusted_p.assign(m, 1.0);
  out.reject.assign(m, false);
  double running = 0.0;
  for (std::size_t rank = 0; rank < m; ++rank) {
    const std::size_t i = order[rank];
    running = std::max(running, static_cast<double>(m - rank) * p_values[i]);
    out.adjusted_p[i] = std::min(1.0, running);
    out.reject[i] = out.adjusted_p[i] < alpha;
  }
  return out;
}

/// Speakers' TTA gain (baseline - adapted WER) against a per-speaker feature.
inline CorrelationResult correlate_gains(std::span<const SpeakerReport> reports,
                                         const std::map<std::string, double>& feature,
                                         const SpearmanOptions& opt = {}) {
  if (reports.size() != feature.size())
    throw Error(ErrorKind::SpeakerSetMismatch, "feature covers " + std::to_string(feature.size()) + " speakers, reports " +
                                                   std::to_string(reports.size()));
  std::vector<double> gains;
  std::vector<double> values;
  for (const auto& r : reports) {
    auto it = feature.find(r.speaker_id);
    if (it == feature.end()) throw Error(ErrorKind::SpeakerSetMismatch, "no feature value for speaker " + r.speaker_id);
    gains.push_back(r.baseline_wer - r.adapted_wer);
    values.push_back(it->second);
  }
  return spearman(gains, values, opt);
}

}  // namespace tta
