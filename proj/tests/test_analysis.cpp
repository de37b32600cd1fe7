#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "support.hpp"
#include "tta/analysis/correlation.hpp"
#include "tta/analysis/gaussian.hpp"
#include "tta/analysis/projection.hpp"

using namespace tta;

namespace {

Eigen::MatrixXd random_frames(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double sd = 1.0) {
  std::normal_distribution<double> d(0.0, sd);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

GaussianSummary gauss1d(double mean, double var) {
  return gaussian_from_moments(Eigen::VectorXd::Constant(1, mean), Eigen::MatrixXd::Constant(1, 1, var), 10);
}

// Ranks by brute force: average of the 1-based positions each value occupies in sorted order.
std::vector<double> rank_oracle(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double w : v) {
      if (w < v[i]) ++less;
      if (w == v[i]) ++equal;
    }
    r[i] = less + (equal + 1) / 2.0;
  }
  return r;
}

double pearson_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i] / n, my += y[i] / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

std::vector<double> holm_oracle(const std::vector<double>& p) {
  const std::size_t m = p.size();
  std::vector<double> adjusted(m);
  for (std::size_t i = 0; i < m; ++i) {
    // adjusted_i = min(1, max over j with p_j <= p_i (ties broken by position) of (m - rank_j) * p_j)
    double best = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const bool before = p[j] < p[i] || (p[j] == p[i] && j <= i);
      if (!before) continue;
      std::size_t rank_j = 0;
      for (std::size_t k = 0; k < m; ++k)
        if (p[k] < p[j] || (p[k] == p[j] && k < j)) ++rank_j;
      best = std::max(best, static_cast<double>(m - rank_j) * p[j]);
    }
    adjusted[i] = std::min(1.0, best);
  }
  return adjusted;
}

SpeakerReport report(const std::string& id, double base, double adapted) {
  return make_speaker_report(id, base, adapted, 5);
}

}  // namespace

TEST(GaussianSummary, MeanOfSquareCorners) {
  Eigen::MatrixXd x(4, 2);
  x << 0, 0, 2, 0, 0, 2, 2, 2;
  const auto g = gaussian_summary(x);
  EXPECT_NEAR(g.mean(0), 1.0, 1e-15);
  EXPECT_NEAR(g.mean(1), 1.0, 1e-15);
  EXPECT_NEAR(g.covariance(0, 0), 4.0 / 3.0 + kCovarianceRidge, 1e-12);
  EXPECT_NEAR(g.covariance(0, 1), 0.0, 1e-12);
  EXPECT_EQ(g.n, 4);
}

TEST(GaussianSummary, ConstantFramesGiveRidgeOnly) {
  const auto g = gaussian_summary(Eigen::MatrixXd::Constant(5, 3, 2.5));
  EXPECT_TRUE(g.covariance.isApprox(kCovarianceRidge * Eigen::MatrixXd::Identity(3, 3)));
}

TEST(GaussianSummary, PermutationInvariantAndSymmetric) {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd x = random_frames(rng, 30, 4);
  const Eigen::MatrixXd flipped = x.colwise().reverse();
  const auto a = gaussian_summary(x);
  const auto b = gaussian_summary(flipped);
  EXPECT_LT((a.mean - b.mean).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((a.covariance - b.covariance).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((a.covariance - a.covariance.transpose()).cwiseAbs().maxCoeff(), 1e-9);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a.covariance);
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-9);
}

TEST(GaussianSummary, NeedsTwoFrames) {
  try {
    gaussian_summary(Eigen::MatrixXd::Zero(1, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TooFewFrames);
  }
}

TEST(Bhattacharyya, ClosedForms1d) {
  EXPECT_NEAR(bhattacharyya_distance(gauss1d(0, 1), gauss1d(2, 1)), 0.5, 1e-12);
  EXPECT_NEAR(bhattacharyya_distance(gauss1d(0, 1), gauss1d(0, 4)), 0.5 * std::log(1.25), 1e-12);
  EXPECT_NEAR(bhattacharyya_distance(gauss1d(3, 2), gauss1d(3, 2)), 0.0, 1e-15);
}

TEST(Bhattacharyya, MatchesGeneralFormulaInTwoDimensions) {
  Eigen::VectorXd ma(2), mb(2);
  ma << 0.5, -1.0;
  mb << -0.3, 0.7;
  Eigen::MatrixXd sa(2, 2), sb(2, 2);
  sa << 2.0, 0.3, 0.3, 1.0;
  sb << 1.0, -0.2, -0.2, 0.5;
  const Eigen::MatrixXd s = (sa + sb) / 2;
  const Eigen::VectorXd d = ma - mb;
  // 2x2 inverse and determinants by hand.
  const double det_s = s(0, 0) * s(1, 1) - s(0, 1) * s(1, 0);
  Eigen::MatrixXd inv(2, 2);
  inv << s(1, 1), -s(0, 1), -s(1, 0), s(0, 0);
  inv /= det_s;
  const double det_a = sa(0, 0) * sa(1, 1) - sa(0, 1) * sa(1, 0);
  const double det_b = sb(0, 0) * sb(1, 1) - sb(0, 1) * sb(1, 0);
  const double expected = d.dot(inv * d) / 8 + 0.5 * std::log(det_s / std::sqrt(det_a * det_b));
  EXPECT_NEAR(bhattacharyya_distance(gaussian_from_moments(ma, sa), gaussian_from_moments(mb, sb)), expected, 1e-12);
}

TEST(Bhattacharyya, SymmetricNonNegativeAndZeroOnlyForIdentical) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = gaussian_summary(random_frames(rng, 12, 3));
    const auto b = gaussian_summary(random_frames(rng, 15, 3, 1.5));
    const double ab = bhattacharyya_distance(a, b);
    EXPECT_NEAR(ab, bhattacharyya_distance(b, a), 1e-12);
    EXPECT_GT(ab, 0.0);
    EXPECT_NEAR(bhattacharyya_distance(a, a), 0.0, 1e-9);
  }
}

TEST(Bhattacharyya, DimensionMismatch) {
  std::mt19937_64 rng(3);
  try {
    bhattacharyya_distance(gaussian_summary(random_frames(rng, 5, 2)), gaussian_summary(random_frames(rng, 5, 3)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
  }
}

TEST(Bhattacharyya, SingularCovarianceWithoutRidge) {
  const auto singular = gaussian_from_moments(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Zero(2, 2));
  try {
    bhattacharyya_distance(singular, singular);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SingularCovariance);
  }
}

TEST(WithinSpeakerVariance, ConstantScalingAndTranslation) {
  EXPECT_EQ(within_speaker_variance(Eigen::MatrixXd::Constant(6, 4, -3.0)), 0.0);
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd x = random_frames(rng, 40, 5);
  const double v = within_speaker_variance(x);
  EXPECT_NEAR(within_speaker_variance(3.0 * x), 9.0 * v, 1e-9 * v);
  const Eigen::RowVectorXd shift = Eigen::RowVectorXd::LinSpaced(5, -10, 10);
  EXPECT_NEAR(within_speaker_variance(x.rowwise() + shift), v, 1e-9 * v);
  // Trace equals the sum of per-dimension unbiased variances.
  double expected = 0.0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double mean = x.col(j).mean();
    expected += (x.col(j).array() - mean).square().sum() / (x.rows() - 1);
  }
  EXPECT_NEAR(v, expected, 1e-12);
}

TEST(UtteranceMeans, OneRowPerUtterance) {
  std::vector<FeatureMatrix> utts(2);
  utts[0].frames = Eigen::MatrixXd(2, 2);
  utts[0].frames << 1, 2, 3, 4;
  utts[1].frames = Eigen::MatrixXd::Constant(3, 2, 5.0);
  const auto m = utterance_means(utts);
  ASSERT_EQ(m.rows(), 2);
  EXPECT_EQ(m(0, 0), 2.0);
  EXPECT_EQ(m(0, 1), 3.0);
  EXPECT_EQ(m(1, 1), 5.0);
}

TEST(Pca2d, TwoDimensionalInputIsRigidlyMoved) {
  std::mt19937_64 rng(5);
  Eigen::MatrixXd x = random_frames(rng, 25, 2);
  x.col(0) *= 3.0;
  const auto y = pca_2d(x);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.rows(); ++j)
      EXPECT_NEAR((y.row(i) - y.row(j)).norm(), (x.row(i) - x.row(j)).norm(), 1e-9);
}

TEST(Pca2d, CollinearPointsHaveNoSecondAxisSpread) {
  Eigen::MatrixXd x(5, 3);
  for (int i = 0; i < 5; ++i) x.row(i) << 1.0 + i, 2.0 - 2.0 * i, 0.5 * i;
  const auto y = pca_2d(x);
  EXPECT_LT(y.col(1).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_GT(y.col(0).cwiseAbs().maxCoeff(), 1.0);
}

TEST(Pca2d, DeterministicAndFirstAxisDominates) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd x = random_frames(rng, 20, 6);
    const auto a = pca_2d(x);
    EXPECT_EQ(a, pca_2d(x));
    EXPECT_GE(a.col(0).squaredNorm(), a.col(1).squaredNorm());
  }
}

TEST(Pca2d, TooFewPoints) {
  try {
    pca_2d(Eigen::MatrixXd::Zero(2, 4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TooFewPoints);
  }
}

TEST(ProjectionFiles, ExternalRoundTrip) {
  tta::testing::TempDir dir("proj");
  std::mt19937_64 rng(7);
  const Eigen::MatrixXd x = random_frames(rng, 4, 3);
  const std::vector<std::string> ids{"a", "b", "c", "d"};
  write_projection_input(dir.path() / "in.csv", ids, x);
  std::ifstream in(dir.path() / "in.csv");
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  EXPECT_EQ(header, "point_id,d0,d1,d2");
  EXPECT_EQ(first.substr(0, 2), "a,");

  std::ofstream(dir.path() / "out.csv") << "point_id,x,y\na,1,2\nb,3,4.5\nc,-1,0\n";
  const auto pts = read_projection_output(dir.path() / "out.csv");
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_EQ(pts[1].point_id, "b");
  EXPECT_EQ(pts[1].y, 4.5);

  std::ofstream(dir.path() / "bad.csv") << "id,x,y\na,1,2\n";
  try {
    read_projection_output(dir.path() / "bad.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::CorruptFile);
  }
}

TEST(Spearman, Examples) {
  const std::vector<double> x{1, 2, 3, 4}, y{1, 4, 9, 16}, rev{16, 9, 4, 1};
  EXPECT_NEAR(spearman(x, y).r, 1.0, 1e-15);
  EXPECT_NEAR(spearman(x, rev).r, -1.0, 1e-15);
  EXPECT_EQ(spearman(x, y).p_value, 0.0);
}

TEST(Spearman, TiesMatchMidRankOracle) {
  const std::vector<double> x{1, 2, 2, 3}, y{1, 3, 2, 4};
  const double expected = pearson_oracle(rank_oracle(x), rank_oracle(y));
  EXPECT_NEAR(spearman(x, y).r, expected, 1e-9);
  EXPECT_NEAR(expected, 0.9486832980505138, 1e-12);
}

TEST(Spearman, RandomTiedDataMatchesOracle) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> d(0, 5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x, y;
    for (int i = 0; i < 12; ++i) x.push_back(d(rng)), y.push_back(d(rng));
    const double r_expected = pearson_oracle(rank_oracle(x), rank_oracle(y));
    if (!std::isfinite(r_expected)) continue;  // a constant draw
    EXPECT_NEAR(spearman(x, y).r, r_expected, 1e-12);
  }
}

TEST(Spearman, InvariantUnderMonotoneTransforms) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> d;
  std::vector<double> x, y;
  for (int i = 0; i < 15; ++i) {
    x.push_back(d(rng));
    y.push_back(x.back() + d(rng));
  }
  std::vector<double> fx, gy;
  for (double v : x) fx.push_back(std::exp(v));
  for (double v : y) gy.push_back(v * v * v - 4.0);
  const auto a = spearman(x, y);
  const auto b = spearman(fx, gy);
  EXPECT_NEAR(a.r, b.r, 1e-12);
  EXPECT_NEAR(a.p_value, b.p_value, 1e-12);
}

TEST(Spearman, TPValueMatchesKnownValue) {
  // r = 0.5 over n = 10: t = 0.5 * sqrt(8 / 0.75), two-sided p with 8 df is 0.14111328125.
  EXPECT_NEAR(correlation_t_pvalue(0.5, 10), 0.14111328125, 1e-12);
}

TEST(Spearman, PermutationModeEnumeratesSmallSamples) {
  const std::vector<double> x{1, 2, 3, 4, 5}, y{2, 1, 4, 3, 5};
  SpearmanOptions opt;
  opt.p_method = CorrelationPValue::permutation;
  const auto r = spearman(x, y, opt);
  // Count permutations of y-ranks with |rho| >= observed by direct enumeration.
  std::vector<double> perm{1, 2, 3, 4, 5};
  int extreme = 0, total = 0;
  do {
    ++total;
    if (std::abs(pearson_oracle(x, perm)) >= std::abs(r.r) - 1e-12) ++extreme;
  } while (std::next_permutation(perm.begin(), perm.end()));
  EXPECT_EQ(total, 120);
  EXPECT_NEAR(r.p_value, static_cast<double>(extreme) / total, 1e-15);
}

TEST(Spearman, PermutationModeIsSeededForLargeSamples) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> d;
  std::vector<double> x, y;
  for (int i = 0; i < 20; ++i) x.push_back(d(rng)), y.push_back(d(rng));
  SpearmanOptions opt;
  opt.p_method = CorrelationPValue::permutation;
  opt.permutations = 2000;
  opt.seed = 3;
  const double p = spearman(x, y, opt).p_value;
  EXPECT_EQ(p, spearman(x, y, opt).p_value);
  EXPECT_NEAR(p, spearman(x, y).p_value, 0.08);
}

TEST(Spearman, Errors) {
  const std::vector<double> a{1, 2, 3, 4}, b{1, 2, 3}, c{2, 2, 2, 2};
  auto kind_of = [](auto f) {
    try {
      f();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::InvalidConfig;
  };
  EXPECT_EQ(kind_of([&] { spearman(a, b); }), ErrorKind::LengthMismatch);
  EXPECT_EQ(kind_of([&] { spearman(a, c); }), ErrorKind::ZeroVariance);
  EXPECT_EQ(kind_of([&] { spearman(std::vector<double>{1, 2, 3}, std::vector<double>{2, 1, 3}); }), ErrorKind::TooFewPoints);
}

TEST(HolmBonferroni, Examples) {
  const auto a = holm_bonferroni(std::vector<double>{0.01, 0.04});
  EXPECT_NEAR(a.adjusted_p[0], 0.02, 1e-15);
  EXPECT_NEAR(a.adjusted_p[1], 0.04, 1e-15);
  EXPECT_TRUE(a.reject[0]);
  EXPECT_TRUE(a.reject[1]);
  const auto b = holm_bonferroni(std::vector<double>{0.03, 0.04});
  EXPECT_NEAR(b.adjusted_p[0], 0.06, 1e-15);
  EXPECT_NEAR(b.adjusted_p[1], 0.06, 1e-15);
  EXPECT_FALSE(b.reject[0]);
  EXPECT_FALSE(b.reject[1]);
  const auto c = holm_bonferroni(std::vector<double>{0.2});
  EXPECT_EQ(c.adjusted_p[0], 0.2);
  EXPECT_TRUE(holm_bonferroni(std::vector<double>{}).adjusted_p.empty());
}

TEST(HolmBonferroni, MatchesDefinitionAndDominatesBonferroni) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 0.2);
  std::uniform_int_distribution<int> len(1, 12);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> p(static_cast<std::size_t>(len(rng)));
    for (auto& v : p) v = u(rng);
    if (trial % 5 == 0) p.push_back(p.front());  // ties
    const auto hb = holm_bonferroni(p);
    const auto expected = holm_oracle(p);
    std::vector<std::size_t> order(p.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] < p[b]; });
    for (std::size_t i = 0; i < p.size(); ++i) {
      EXPECT_NEAR(hb.adjusted_p[i], expected[i], 1e-15);
      EXPECT_GE(hb.adjusted_p[i], p[i]);
      if (p[i] * static_cast<double>(p.size()) < 0.05) EXPECT_TRUE(hb.reject[i]);
      if (i) EXPECT_GE(hb.adjusted_p[order[i]], hb.adjusted_p[order[i - 1]]);
    }
  }
}

TEST(HolmBonferroni, InvalidInputs) {
  EXPECT_THROW(holm_bonferroni(std::vector<double>{1.2}), Error);
  EXPECT_THROW(holm_bonferroni(std::vector<double>{-0.1}), Error);
  EXPECT_THROW(holm_bonferroni(std::vector<double>{0.1}, 0.0), Error);
}

TEST(CorrelateGains, MonotoneSyntheticGainsCorrelate) {
  std::vector<SpeakerReport> reports;
  std::map<std::string, double> noise;
  for (int s = 0; s < 10; ++s) {
    const std::string id = "s" + std::to_string(s);
    const double level = -30.0 + 1.5 * s;
    noise[id] = level;
    reports.push_back(report(id, 0.1 + 0.02 * s, 0.1 + 0.005 * s));
  }
  const auto r = correlate_gains(reports, noise);
  EXPECT_GT(r.r, 0.9);
  EXPECT_EQ(r.n, 10);
}

TEST(CorrelateGains, ConstantFeatureAndMismatch) {
  std::vector<SpeakerReport> reports{report("a", 0.3, 0.1), report("b", 0.2, 0.15), report("c", 0.4, 0.1),
                                     report("d", 0.1, 0.1)};
  std::map<std::string, double> flat{{"a", 1}, {"b", 1}, {"c", 1}, {"d", 1}};
  try {
    correlate_gains(reports, flat);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ZeroVariance);
  }
  std::map<std::string, double> partial{{"a", 1}, {"b", 2}, {"c", 3}};
  std::map<std::string, double> wrong{{"a", 1}, {"b", 2}, {"c", 3}, {"e", 4}};
  for (const auto* f : {&partial, &wrong}) {
    try {
      correlate_gains(reports, *f);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::SpeakerSetMismatch);
    }
  }
}
