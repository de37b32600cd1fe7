#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tta/corpus/features.hpp"
#include "tta/error.hpp"

namespace tta {

inline constexpr double kCovarianceRidge = 1e-6;

struct GaussianSummary {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  int n = 0;

  Eigen::Index dim() const { return mean.size(); }
};

namespace detail {

/// Unbiased sample covariance of the rows of `x`.
inline Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& x, Eigen::VectorXd* mean_out = nullptr) {
  if (x.rows() < 2) throw Error(ErrorKind::TooFewFrames, "need at least 2 frames, got " + std::to_string(x.rows()));
  const Eigen::VectorXd mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - mean.transpose();
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
  cov = 0.5 * (cov + cov.transpose());
  if (mean_out) *mean_out = mean;
  return cov;
}

inline double log_det_spd(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::SingularCovariance, "covariance is not positive definite");
  const auto& l = llt.matrixL();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double d = l(i, i);
    if (!(d > 0.0)) throw Error(ErrorKind::SingularCovariance, "covariance is not positive definite");
    acc += std::log(d);
  }
  return 2.0 * acc;
}

}  // namespace detail

/// Rows of `frames` are samples. Adds kCovarianceRidge to the diagonal.
inline GaussianSummary gaussian_summary(const Eigen::MatrixXd& frames) {
  GaussianSummary g;
  g.covariance = detail::sample_covariance(frames, &g.mean);
  g.covariance.diagonal().array() += kCovarianceRidge;
  g.n = static_cast<int>(frames.rows());
  return g;
}

inline GaussianSummary gaussian_summary(const FeatureMatrix& features) { return gaussian_summary(features.frames); }

/// Build summary from already-estimated moments (no ridge added).
inline GaussianSummary gaussian_from_moments(Eigen::VectorXd mean, Eigen::MatrixXd covariance, int n = 0) {
  return GaussianSummary{std::move(mean), std::move(covariance), n};
}

inline double bhattacharyya_distance(const GaussianSummary& a, const GaussianSummary& b) {
  if (a.dim() != b.dim() || a.covariance.rows() != a.dim() || b.covariance.rows() != b.dim())
    throw Error(ErrorKind::DimensionMismatch, "gaussian dimensions differ");
  const Eigen::MatrixXd avg = 0.5 * (a.covariance + b.covariance);
  Eigen::LLT<Eigen::MatrixXd> llt(avg);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::SingularCovariance, "pooled covariance is singular");
  const Eigen::VectorXd diff = a.mean - b.mean;
  const double mahal = diff.dot(llt.solve(diff));
  const double ld_avg = detail::log_det_spd(avg);
  const double ld_a = detail::log_det_spd(a.covariance);
  const double ld_b = detail::log_det_spd(b.covariance);
  const double d = 0.125 * mahal + 0.5 * (ld_avg - 0.5 * (ld_a + ld_b));
  return d < 0.0 ? 0.0 : d;
}

/// Total variance: trace of the unbiased sample covariance, no ridge.
inline double within_speaker_variance(const Eigen::MatrixXd& frames) {
  return detail::sample_covariance(frames).trace();
}

inline double within_speaker_variance(const FeatureMatrix& features) { return within_speaker_variance(features.frames); }

/// One row per utterance: the mean MFCC vector of that utterance.
inline Eigen::MatrixXd utterance_means(std::span<const FeatureMatrix> utterances) {
  if (utterances.empty()) return {};
  const Eigen::Index d = utterances.front().frames.cols();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(utterances.size()), d);
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    const auto& f = utterances[i].frames;
    if (f.cols() != d) throw Error(ErrorKind::DimensionMismatch, "utterance feature dimensions differ");
    if (f.rows() == 0) throw Error(ErrorKind::TooFewFrames, "utterance has no frames");
    out.row(static_cast<Eigen::Index>(i)) = f.colwise().mean();
  }
  return out;
}

}  // namespace tta
