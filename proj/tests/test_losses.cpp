#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "support.hpp"
#include "tta/objectives/losses.hpp"

using namespace tta;

namespace {

ProbMatrix uniform(Eigen::Index frames, Eigen::Index classes) {
  return ProbMatrix{Eigen::MatrixXd::Constant(frames, classes, 1.0 / static_cast<double>(classes)), 1.0};
}

ProbMatrix one_hot(const std::vector<int>& cls, Eigen::Index classes) {
  ProbMatrix p{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cls.size()), classes), 1.0};
  for (std::size_t i = 0; i < cls.size(); ++i) p.values(static_cast<Eigen::Index>(i), cls[i]) = 1.0;
  return p;
}

LogitMatrix random_logits(std::mt19937_64& rng, Eigen::Index frames, Eigen::Index classes, double sd = 2.0) {
  std::normal_distribution<double> d(0.0, sd);
  LogitMatrix z;
  z.values.resize(frames, classes);
  for (Eigen::Index i = 0; i < z.values.size(); ++i) z.values.data()[i] = d(rng);
  return z;
}

ProbMatrix random_probs(std::mt19937_64& rng, Eigen::Index frames, Eigen::Index classes) {
  return softmax_temperature(random_logits(rng, frames, classes), 1.0);
}

// Independent oracles written straight from the definitions.

double entropy_oracle(const Eigen::MatrixXd& p) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index c = 0; c < p.cols(); ++c)
      if (p(i, c) > 0) s -= p(i, c) * std::log(p(i, c));
  return s / static_cast<double>(p.rows());
}

double mcc_oracle(const Eigen::MatrixXd& p) {
  const auto C = p.cols();
  std::vector<std::vector<double>> K(C, std::vector<double>(C, 0.0));
  for (Eigen::Index j = 0; j < C; ++j)
    for (Eigen::Index jj = 0; jj < C; ++jj)
      for (Eigen::Index i = 0; i < p.rows(); ++i) K[j][jj] += p(i, j) * p(i, jj);
  double total = 0.0;
  for (Eigen::Index j = 0; j < C; ++j) {
    double row = 0.0;
    for (Eigen::Index jj = 0; jj < C; ++jj) row += K[j][jj];
    for (Eigen::Index jj = 0; jj < C; ++jj)
      if (jj != j) total += K[j][jj] / (row + 1e-12);
  }
  return total / static_cast<double>(C);
}

double renyi_oracle(const Eigen::MatrixXd& p, double rho) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    double acc = 0.0;
    for (Eigen::Index c = 0; c < p.cols(); ++c) acc += std::pow(p(i, c), rho);
    s += std::log(acc) / (1.0 - rho);
  }
  return s / static_cast<double>(p.rows());
}

double ns_oracle(const Eigen::MatrixXd& p, int k) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    std::vector<double> row;
    for (Eigen::Index c = 0; c < p.cols(); ++c) row.push_back(p(i, c));
    std::sort(row.begin(), row.end(), std::greater<>());
    double outside = 0.0;
    for (std::size_t c = static_cast<std::size_t>(k); c < row.size(); ++c) outside += row[c];
    s -= std::log(1.0 - outside + 1e-12);
  }
  return s / static_cast<double>(p.rows());
}

// Central-difference gradient of f with respect to the logits.
template <typename F>
double max_logit_gradient_error(const LogitMatrix& z, const Eigen::MatrixXd& analytic, F f, double eps = 1e-5) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < z.frames(); ++i)
    for (Eigen::Index c = 0; c < z.classes(); ++c) {
      LogitMatrix zp = z, zm = z;
      zp.values(i, c) += eps;
      zm.values(i, c) -= eps;
      const double numeric = (f(zp) - f(zm)) / (2 * eps);
      const double scale = std::max({std::abs(numeric), std::abs(analytic(i, c)), 1e-6});
      worst = std::max(worst, std::abs(numeric - analytic(i, c)) / scale);
    }
  return worst;
}

Eigen::MatrixXd permute_rows(const Eigen::MatrixXd& m, std::mt19937_64& rng) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.row(i) = m.row(order[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace

TEST(Softmax, SymmetricRowIsHalfHalf) {
  LogitMatrix z{Eigen::MatrixXd::Zero(1, 2), 0};
  const auto p = softmax_temperature(z, 1.0);
  EXPECT_DOUBLE_EQ(p.values(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(p.values(0, 1), 0.5);
}

TEST(Softmax, LargeTemperatureApproachesUniform) {
  std::mt19937_64 rng(1);
  const auto z = random_logits(rng, 4, 7);
  const auto p = softmax_temperature(z, 1e8);
  EXPECT_LT((p.values.array() - 1.0 / 7).abs().maxCoeff(), 1e-6);
  EXPECT_EQ(p.temperature_used, 1e8);
}

TEST(Softmax, StableForHugeLogits) {
  LogitMatrix z{Eigen::MatrixXd(1, 2), 0};
  z.values << 1000.0, 0.0;
  const auto p = softmax_temperature(z, 1.0);
  EXPECT_TRUE(p.values.allFinite());
  EXPECT_DOUBLE_EQ(p.values(0, 0), 1.0);
  EXPECT_LT(p.values(0, 1), 1e-300);
}

TEST(Softmax, RowsAreStochastic) {
  std::mt19937_64 rng(2);
  for (double t : {0.5, 1.0, 2.5}) {
    const auto p = softmax_temperature(random_logits(rng, 9, 29, 10.0), t);
    EXPECT_LT((p.values.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
    EXPECT_GE(p.values.minCoeff(), 0.0);
  }
}

TEST(Softmax, NonPositiveTemperatureIsRejected) {
  LogitMatrix z{Eigen::MatrixXd::Zero(1, 2), 0};
  EXPECT_THROW(softmax_temperature(z, 0.0), Error);
  EXPECT_THROW(softmax_temperature(z, -1.0), Error);
}

TEST(EntropyLoss, Examples) {
  EXPECT_NEAR(entropy_loss(uniform(5, 32)), std::log(32.0), 1e-12);
  EXPECT_EQ(entropy_loss(one_hot({0, 3, 3, 1}, 4)), 0.0);
  ProbMatrix half{Eigen::MatrixXd::Zero(3, 6), 1.0};
  half.values.leftCols(2).setConstant(0.5);
  EXPECT_NEAR(entropy_loss(half), std::log(2.0), 1e-12);
}

TEST(EntropyLoss, MatchesOracleAndIsBoundedByLogC) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_probs(rng, 1 + trial % 7, 2 + trial % 30);
    const double h = entropy_loss(p);
    EXPECT_NEAR(h, entropy_oracle(p.values), 1e-12);
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, std::log(static_cast<double>(p.classes())) + 1e-12);
  }
}

TEST(MccLoss, Examples) {
  EXPECT_NEAR(mcc_loss(one_hot({2, 2, 2}, 5)), 0.0, 1e-12);
  EXPECT_NEAR(mcc_loss(uniform(4, 2)), 0.5, 1e-12);
  for (int C : {2, 5, 29})
    for (int L : {1, 3, 17}) EXPECT_NEAR(mcc_loss(uniform(L, C)), (C - 1.0) / C, 1e-9) << C << " " << L;
}

TEST(MccLoss, MatchesBruteForceConfusionMatrix) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 40; ++trial) {
    const auto p = random_probs(rng, 1 + trial % 9, 2 + trial % 12);
    EXPECT_NEAR(mcc_loss(p), mcc_oracle(p.values), 1e-12);
  }
}

TEST(MccLoss, UnusedClassIsFlaggedButFinite) {
  ProbMatrix p{Eigen::MatrixXd::Zero(2, 3), 1.0};
  p.values << 0.5, 0.5, 0.0, 0.2, 0.8, 0.0;
  const auto t = mcc_term(p);
  EXPECT_TRUE(t.flagged);
  EXPECT_TRUE(std::isfinite(t.value));
  EXPECT_TRUE(t.d_logits.allFinite());
  EXPECT_NEAR(t.value, mcc_oracle(p.values), 1e-12);
  EXPECT_FALSE(mcc_term(uniform(2, 3)).flagged);
}

TEST(MccLoss, InvariantToDuplicatingFrames) {
  std::mt19937_64 rng(5);
  const auto p = random_probs(rng, 6, 8);
  ProbMatrix twice{Eigen::MatrixXd(12, 8), 1.0};
  twice.values << p.values, p.values;
  EXPECT_NEAR(mcc_loss(twice), mcc_loss(p), 1e-12);
}

TEST(RenyiLoss, Examples) {
  for (double rho : {0.25, 0.5, 2.0, 3.0}) {
    EXPECT_NEAR(renyi_entropy_loss(uniform(3, 29), rho), std::log(29.0), 1e-12);
    EXPECT_NEAR(renyi_entropy_loss(one_hot({1, 0}, 4), rho), 0.0, 1e-12);
  }
}

TEST(RenyiLoss, ApproachesShannonNearOrderOne) {
  std::mt19937_64 rng(6);
  const auto p = random_probs(rng, 5, 29);
  for (double rho : {1.0 - 1e-6, 1.0 + 1e-6}) EXPECT_NEAR(renyi_entropy_loss(p, rho), entropy_loss(p), 1e-4);
}

TEST(RenyiLoss, MatchesOracleAndRejectsOrderOne) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const auto p = random_probs(rng, 1 + trial % 5, 3 + trial % 20);
    const double rho = 0.3 + 0.1 * trial;
    if (std::abs(rho - 1.0) < 1e-9) continue;
    EXPECT_NEAR(renyi_entropy_loss(p, rho), renyi_oracle(p.values, rho), 1e-10);
  }
  EXPECT_THROW(renyi_entropy_loss(uniform(1, 3), 1.0), Error);
  EXPECT_THROW(renyi_entropy_loss(uniform(1, 3), 0.0), Error);
}

TEST(RenyiLoss, NonIncreasingInOrder) {
  std::mt19937_64 rng(8);
  const auto p = random_probs(rng, 4, 10);
  double prev = renyi_entropy_loss(p, 0.1);
  for (double rho : {0.3, 0.6, 0.9, 1.5, 2.0, 4.0}) {
    const double h = renyi_entropy_loss(p, rho);
    EXPECT_LE(h, prev + 1e-12);
    prev = h;
  }
}

TEST(NegativeSampling, Examples) {
  EXPECT_NEAR(negative_sampling_loss(one_hot({0, 4, 2}, 6), 1), 0.0, 1e-11);
  EXPECT_NEAR(negative_sampling_loss(uniform(7, 32), 2), -std::log(2.0 / 32.0), 1e-9);
}

TEST(NegativeSampling, MatchesSortingOracle) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 40; ++trial) {
    const auto p = random_probs(rng, 1 + trial % 6, 6 + trial % 20);
    const int k = 1 + trial % 5;
    EXPECT_NEAR(negative_sampling_loss(p, k), ns_oracle(p.values, k), 1e-12);
  }
}

TEST(NegativeSampling, NonIncreasingInK) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_probs(rng, 3, 12);
    double prev = negative_sampling_loss(p, 1);
    for (int k = 2; k < 12; ++k) {
      const double v = negative_sampling_loss(p, k);
      EXPECT_LE(v, prev + 1e-15);
      prev = v;
    }
  }
}

TEST(NegativeSampling, KOutOfRangeIsRejected) {
  EXPECT_THROW(negative_sampling_loss(uniform(1, 5), 0), Error);
  EXPECT_THROW(negative_sampling_loss(uniform(1, 5), 5), Error);
}

TEST(Combine, ArithmeticExamples) {
  EXPECT_NEAR(combine_suta(1.0, 2.0, 0.3), 1.7, 1e-15);
  EXPECT_NEAR(combine_sgem(1.2, 0.5, 0.3), 1.35, 1e-15);
}

TEST(SutaLoss, TotalIsAffineInAlpha) {
  std::mt19937_64 rng(11);
  const auto z = random_logits(rng, 8, 29);
  for (double alpha : {0.0, 0.3, 0.5, 1.0}) {
    const auto v = suta_loss(z, alpha, 2.5);
    EXPECT_EQ(v.total, alpha * v.components.at("em") + (1.0 - alpha) * v.components.at("mcc"));
    EXPECT_EQ(v.weights.at("em"), alpha);
    EXPECT_EQ(v.weights.at("mcc"), 1.0 - alpha);
  }
  const auto p = softmax_temperature(z, 2.5);
  EXPECT_EQ(suta_loss(z, 1.0, 2.5).total, entropy_loss(p));
  EXPECT_EQ(suta_loss(z, 0.0, 2.5).total, mcc_loss(p));
  EXPECT_THROW(suta_loss(z, 1.5, 2.5), Error);
}

TEST(SgemLoss, TotalAndBoundary) {
  std::mt19937_64 rng(12);
  const auto z = random_logits(rng, 8, 29);
  const auto v = sgem_loss(z, 0.3, 0.5, 2.5, 5);
  EXPECT_EQ(v.total, v.components.at("gem") + 0.3 * v.components.at("ns"));
  const auto p = softmax_temperature(z, 2.5);
  EXPECT_EQ(sgem_loss(z, 0.0, 0.5, 2.5, 5).total, renyi_entropy_loss(p, 0.5));
  EXPECT_THROW(sgem_loss(z, -0.1, 0.5, 2.5, 5), Error);
}

TEST(Losses, InvariantToFramePermutation) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const auto z = random_logits(rng, 12, 29);
    const LogitMatrix zp{permute_rows(z.values, rng), 0};
    EXPECT_NEAR(suta_loss(z, 0.3, 2.5).total, suta_loss(zp, 0.3, 2.5).total, 1e-12);
    EXPECT_NEAR(sgem_loss(z, 0.3, 0.5, 2.5, 5).total, sgem_loss(zp, 0.3, 0.5, 2.5, 5).total, 1e-12);
  }
}

TEST(Losses, LogitGradientsMatchCentralDifferences) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 5; ++trial) {
    const auto z = random_logits(rng, 6, 11);
    const double T = 1.0 + 0.5 * trial;
    auto on_p = [T](auto term) { return [T, term](const LogitMatrix& zz) { return term(softmax_temperature(zz, T)).value; }; };
    const auto p = softmax_temperature(z, T);
    EXPECT_LT(max_logit_gradient_error(z, entropy_term(p).d_logits, on_p([](const ProbMatrix& q) { return entropy_term(q); })), 1e-5);
    EXPECT_LT(max_logit_gradient_error(z, mcc_term(p).d_logits, on_p([](const ProbMatrix& q) { return mcc_term(q); })), 1e-5);
    EXPECT_LT(max_logit_gradient_error(z, renyi_term(p, 0.5).d_logits,
                                       on_p([](const ProbMatrix& q) { return renyi_term(q, 0.5); })),
              1e-5);
    // Continuous logits have no top-k ties, and a 1e-5 step does not reorder them.
    EXPECT_LT(max_logit_gradient_error(z, negative_sampling_term(p, 3).d_logits,
                                       on_p([](const ProbMatrix& q) { return negative_sampling_term(q, 3); })),
              1e-5);
  }
}

TEST(Losses, BlankFrameFilterDropsRowsAndZerosTheirGradient) {
  LogitMatrix z{Eigen::MatrixXd::Zero(3, 4), 0};
  z.values.row(0) << 5, 0, 0, 0;  // blank argmax
  z.values.row(1) << 0, 3, 1, 0;
  z.values.row(2) << 0, 1, 0, 4;
  const auto kept = suta_loss_with_grad(z, 0.3, 2.5, FrameFilter{true});
  LogitMatrix sub{z.values.bottomRows(2), 0};
  EXPECT_NEAR(kept.value.total, suta_loss(sub, 0.3, 2.5).total, 1e-15);
  EXPECT_EQ(kept.d_logits.row(0).cwiseAbs().maxCoeff(), 0.0);

  LogitMatrix all_blank{Eigen::MatrixXd::Zero(2, 4), 0};
  all_blank.values.col(0).setConstant(3.0);
  const auto empty = sgem_loss_with_grad(all_blank, 0.3, 0.5, 2.5, 2, FrameFilter{true});
  EXPECT_EQ(empty.value.total, 0.0);
  EXPECT_EQ(empty.d_logits.cwiseAbs().maxCoeff(), 0.0);
}
