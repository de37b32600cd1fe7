#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tta/error.hpp"
#include "tta/model/types.hpp"

namespace tta {

/// Row-stochastic matrix produced by a temperature softmax.
struct ProbMatrix {
  Eigen::MatrixXd values;
  double temperature_used = 1.0;

  Eigen::Index frames() const { return values.rows(); }
  Eigen::Index classes() const { return values.cols(); }
};

/// Row-wise softmax of z / T, stabilized by subtracting each row's maximum.
inline ProbMatrix softmax_temperature(const LogitMatrix& z, double temperature) {
  if (!(temperature > 0.0)) throw Error(ErrorKind::InvalidConfig, "temperature must be positive");
  ProbMatrix p;
  p.temperature_used = temperature;
  p.values.resize(z.frames(), z.classes());
  for (Eigen::Index i = 0; i < z.frames(); ++i) {
    const Eigen::RowVectorXd scaled = z.values.row(i) / temperature;
    const Eigen::RowVectorXd e = (scaled.array() - scaled.maxCoeff()).exp();
    p.values.row(i) = e / e.sum();
  }
  return p;
}

/// A loss term with its gradient w.r.t. the logits that produced `p`
/// (the 1/T factor of the softmax is included).
struct LossTerm {
  double value = 0.0;
  Eigen::MatrixXd d_logits;
  bool flagged = false;  // degenerate input handled by regularization
};

namespace detail {

/// Chain rule through the softmax: given p ⊙ dL/dp, returns dL/dz.
inline Eigen::MatrixXd through_softmax(const ProbMatrix& p, const Eigen::MatrixXd& p_times_grad) {
  const Eigen::VectorXd inner = p_times_grad.rowwise().sum();
  Eigen::MatrixXd dz = p_times_grad - (p.values.array().colwise() * inner.array()).matrix();
  return dz / p.temperature_used;
}

inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

}  // namespace detail

/// Mean per-frame Shannon entropy, 0 log 0 := 0.
inline LossTerm entropy_term(const ProbMatrix& p) {
  const Eigen::Index frames = p.frames();
  LossTerm out;
  out.d_logits = Eigen::MatrixXd::Zero(frames, p.classes());
  if (frames == 0) return out;
  const double inv_l = 1.0 / static_cast<double>(frames);
  for (Eigen::Index i = 0; i < frames; ++i) {
    double h = 0.0;
    for (Eigen::Index c = 0; c < p.classes(); ++c) h -= detail::xlogx(p.values(i, c));
    out.value += h;
    for (Eigen::Index c = 0; c < p.classes(); ++c) {
      const double v = p.values(i, c);
      out.d_logits(i, c) = v > 0.0 ? -inv_l * v * (std::log(v) + h) / p.temperature_used : 0.0;
    }
  }
  out.value *= inv_l;
  return out;
}

inline constexpr double kConfusionEpsilon = 1e-12;

/// Minimum class confusion: with K = PᵀP and K̂ its row-normalized form,
/// returns (1/C) Σ_j Σ_{j'≠j} K̂_jj'. Rows of K are regularized by 1e-12;
/// `flagged` marks an all-zero class column.
inline LossTerm mcc_term(const ProbMatrix& p) {
  const Eigen::Index classes = p.classes();
  const Eigen::MatrixXd& P = p.values;
  const Eigen::VectorXd row_mass = P.rowwise().sum();           // s_i
  const Eigen::VectorXd k_diag = P.array().square().colwise().sum().transpose();  // K_jj
  const Eigen::VectorXd k_rows = P.transpose() * row_mass;      // r_j = Σ_j' K_jj'

  LossTerm out;
  out.flagged = (k_rows.array() == 0.0).any();
  const Eigen::ArrayXd denom = k_rows.array() + kConfusionEpsilon;
  out.value = ((k_rows.array() - k_diag.array()) / denom).sum() / static_cast<double>(classes);

  const Eigen::ArrayXd a = (k_diag.array() + kConfusionEpsilon) / denom.square();
  const Eigen::ArrayXd b = denom.inverse();
  const Eigen::VectorXd shared = P * a.matrix();
  Eigen::MatrixXd g = row_mass * a.matrix().transpose();
  g -= 2.0 * (P.array().rowwise() * b.transpose()).matrix();
  g.colwise() += shared;
  g /= static_cast<double>(classes);
  out.d_logits = detail::through_softmax(p, (P.array() * g.array()).matrix());
  return out;
}

/// Mean per-frame Rényi entropy of order rho: (1/(1-rho)) log Σ_c p^rho.
inline LossTerm renyi_term(const ProbMatrix& p, double rho) {
  if (!(rho > 0.0) || rho == 1.0) throw Error(ErrorKind::InvalidConfig, "Renyi order must be positive and != 1");
  const Eigen::Index frames = p.frames();
  LossTerm out;
  out.d_logits = Eigen::MatrixXd::Zero(frames, p.classes());
  if (frames == 0) return out;
  const double inv_l = 1.0 / static_cast<double>(frames);
  const double scale = rho / (1.0 - rho);
  for (Eigen::Index i = 0; i < frames; ++i) {
    const Eigen::ArrayXd powered = p.values.row(i).array().pow(rho).transpose();
    const double s = powered.sum();
    out.value += std::log(s) / (1.0 - rho);
    // dL/dz = (1/T) rho/(1-rho) (q - p) with q the escort distribution p^rho / S.
    out.d_logits.row(i) = inv_l * scale * (powered.transpose() / s - p.values.row(i).array()).matrix() / p.temperature_used;
  }
  out.value *= inv_l;
  return out;
}

inline constexpr double kNegativeMassEpsilon = 1e-12;

/// Indices of the k largest entries of `row` (ties broken by lower index).
inline std::vector<Eigen::Index> top_k(const Eigen::RowVectorXd& row, int k) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(row.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    return row(a) != row(b) ? row(a) > row(b) : a < b;
  });
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

/// Penalizes probability mass outside each frame's top-k classes:
/// -(1/L) Σ_i log(1 - M_i + 1e-12), M_i the mass outside the top k.
inline LossTerm negative_sampling_term(const ProbMatrix& p, int k) {
  if (k < 1 || k >= p.classes()) throw Error(ErrorKind::InvalidConfig, "negative sampling k must be in [1, C)");
  const Eigen::Index frames = p.frames();
  LossTerm out;
  out.d_logits = Eigen::MatrixXd::Zero(frames, p.classes());
  if (frames == 0) return out;
  const double inv_l = 1.0 / static_cast<double>(frames);
  for (Eigen::Index i = 0; i < frames; ++i) {
    const Eigen::RowVectorXd row = p.values.row(i);
    const auto kept = top_k(row, k);
    double retained = 0.0;
    for (auto c : kept) retained += row(c);
    const double negative_mass = std::max(0.0, row.sum() - retained);
    const double denom = 1.0 - negative_mass + kNegativeMassEpsilon;
    out.value -= std::log(denom);
    Eigen::RowVectorXd pg = Eigen::RowVectorXd::Zero(row.size());
    for (auto c : kept) pg(c) = -inv_l * row(c) / denom;
    out.d_logits.row(i) = (pg - row * pg.sum()) / p.temperature_used;
  }
  out.value *= inv_l;
  return out;
}

inline double entropy_loss(const ProbMatrix& p) { return entropy_term(p).value; }
inline double mcc_loss(const ProbMatrix& p) { return mcc_term(p).value; }
inline double renyi_entropy_loss(const ProbMatrix& p, double rho) { return renyi_term(p, rho).value; }
inline double negative_sampling_loss(const ProbMatrix& p, int k) { return negative_sampling_term(p, k).value; }

struct TtaLossValue {
  double total = 0.0;
  std::map<std::string, double> components;
  std::map<std::string, double> weights;
  bool flagged = false;
};

struct TtaLossResult {
  TtaLossValue value;
  Eigen::MatrixXd d_logits;
};

inline double combine_suta(double em, double mcc, double alpha) { return alpha * em + (1.0 - alpha) * mcc; }
inline double combine_sgem(double gem, double ns, double lambda) { return gem + lambda * ns; }

struct FrameFilter {
  /// Drop frames whose argmax is the blank class before computing losses.
  bool exclude_blank_frames = false;
};

namespace detail {

/// Rows of `z` kept by `filter`, with their original indices.
inline std::pair<LogitMatrix, std::vector<Eigen::Index>> filter_frames(const LogitMatrix& z, const FrameFilter& filter) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < z.frames(); ++i) {
    Eigen::Index arg = 0;
    z.values.row(i).maxCoeff(&arg);
    if (!filter.exclude_blank_frames || arg != z.blank_index) keep.push_back(i);
  }
  LogitMatrix sub;
  sub.blank_index = z.blank_index;
  sub.values.resize(static_cast<Eigen::Index>(keep.size()), z.classes());
  for (std::size_t r = 0; r < keep.size(); ++r) sub.values.row(static_cast<Eigen::Index>(r)) = z.values.row(keep[r]);
  return {std::move(sub), std::move(keep)};
}

inline Eigen::MatrixXd scatter_rows(const Eigen::MatrixXd& sub, const std::vector<Eigen::Index>& rows, Eigen::Index total) {
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(total, sub.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) full.row(rows[r]) = sub.row(static_cast<Eigen::Index>(r));
  return full;
}

}  // namespace detail

/// alpha * L_em + (1 - alpha) * L_mcc on softmax(z / T).
inline TtaLossResult suta_loss_with_grad(const LogitMatrix& z, double alpha, double temperature,
                                         const FrameFilter& filter = {}) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorKind::InvalidConfig, "alpha must lie in [0, 1]");
  auto [sub, rows] = detail::filter_frames(z, filter);
  TtaLossResult out;
  out.value.weights = {{"em", alpha}, {"mcc", 1.0 - alpha}};
  if (rows.empty()) {
    out.value.components = {{"em", 0.0}, {"mcc", 0.0}};
    out.d_logits = Eigen::MatrixXd::Zero(z.frames(), z.classes());
    return out;
  }
  const auto p = softmax_temperature(sub, temperature);
  const auto em = entropy_term(p);
  const auto mcc = mcc_term(p);
  out.value.components = {{"em", em.value}, {"mcc", mcc.value}};
  out.value.total = combine_suta(em.value, mcc.value, alpha);
  out.value.flagged = mcc.flagged;
  out.d_logits = detail::scatter_rows(alpha * em.d_logits + (1.0 - alpha) * mcc.d_logits, rows, z.frames());
  return out;
}

/// L_GEM + lambda * L_NS on softmax(z / T).
inline TtaLossResult sgem_loss_with_grad(const LogitMatrix& z, double lambda, double rho, double temperature, int k,
                                         const FrameFilter& filter = {}) {
  if (!(lambda >= 0.0)) throw Error(ErrorKind::InvalidConfig, "lambda must be non-negative");
  auto [sub, rows] = detail::filter_frames(z, filter);
  TtaLossResult out;
  out.value.weights = {{"gem", 1.0}, {"ns", lambda}};
  if (rows.empty()) {
    out.value.components = {{"gem", 0.0}, {"ns", 0.0}};
    out.d_logits = Eigen::MatrixXd::Zero(z.frames(), z.classes());
    return out;
  }
  const auto p = softmax_temperature(sub, temperature);
  const auto gem = renyi_term(p, rho);
  const auto ns = negative_sampling_term(p, k);
  out.value.components = {{"gem", gem.value}, {"ns", ns.value}};
  out.value.total = combine_sgem(gem.value, ns.value, lambda);
  out.d_logits = detail::scatter_rows(gem.d_logits + lambda * ns.d_logits, rows, z.frames());
  return out;
}

inline TtaLossValue suta_loss(const LogitMatrix& z, double alpha, double temperature) {
  return suta_loss_with_grad(z, alpha, temperature).value;
}

inline TtaLossValue sgem_loss(const LogitMatrix& z, double lambda, double rho, double temperature, int k) {
  return sgem_loss_with_grad(z, lambda, rho, temperature, k).value;
}

}  // namespace tta
