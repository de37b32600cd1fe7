#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "tta/engine/config.hpp"
#include "tta/model/reference_model.hpp"
#include "tta/objectives/losses.hpp"

namespace tta::testing {

/// Gaussian noise with a few random tones, `seconds` long at 16 kHz.
inline Waveform random_waveform(std::uint64_t seed, double seconds = 0.6) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::uniform_real_distribution<double> freq(200.0, 3000.0);
  const double f1 = freq(rng), f2 = freq(rng);
  Waveform w;
  const auto n = static_cast<std::size_t>(seconds * 16000);
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / 16000.0;
    w.samples[i] = noise(rng) + 0.2 * std::sin(2 * std::numbers::pi * f1 * t) + 0.1 * std::sin(2 * std::numbers::pi * f2 * t);
  }
  return w;
}

inline ReferenceModel small_model(std::uint64_t seed, int hidden = 16) {
  ReferenceModelConfig cfg;
  cfg.hidden = hidden;
  return ReferenceModel(cfg, Vocabulary::characters(), seed);
}

struct FdStats {
  int checked = 0;
  int skipped = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;  // over entries whose magnitude is below the relative floor
};

/// Entries where both gradients are below this are compared absolutely.
inline constexpr double kFdRelFloor = 1e-6;

/// Per-frame top-k class sets, used to skip perturbations that change the
/// negative-sampling partition (the loss is not differentiable there).
inline std::vector<std::vector<Eigen::Index>> top_k_sets(const LogitMatrix& z, int k) {
  std::vector<std::vector<Eigen::Index>> out;
  for (Eigen::Index i = 0; i < z.frames(); ++i) {
    auto s = top_k(z.values.row(i), k);
    std::sort(s.begin(), s.end());
    out.push_back(std::move(s));
  }
  return out;
}

/// Compares analytic parameter gradients of `loss` against central
/// differences for `per_tensor` random entries of every selected tensor.
inline FdStats finite_difference_check(ReferenceModel& model, const Eigen::MatrixXd& x, const LossFunctional& loss,
                                       const std::vector<std::string>& groups, std::mt19937_64& rng, int per_tensor,
                                       double eps = 1e-5, int neg_k = 0) {
  FdStats st;
  const GradientResult g = model.gradient_features(x, loss, groups);
  const auto base_sets = neg_k > 0 ? top_k_sets(g.logits, neg_k) : std::vector<std::vector<Eigen::Index>>{};
  for (const auto& grad : g.gradients) {
    Tensor* param = nullptr;
    for (auto& t : model.mutable_parameters())
      if (t.name == grad.name) param = &t;
    std::uniform_int_distribution<Eigen::Index> pick(0, param->values.size() - 1);
    for (int n = 0; n < per_tensor; ++n) {
      const Eigen::Index e = pick(rng);
      const double orig = param->values(e);
      param->values(e) = orig + eps;
      const LogitMatrix zp = model.forward_features(x);
      param->values(e) = orig - eps;
      const LogitMatrix zm = model.forward_features(x);
      param->values(e) = orig;
      if (neg_k > 0 && (top_k_sets(zp, neg_k) != base_sets || top_k_sets(zm, neg_k) != base_sets)) {
        ++st.skipped;
        continue;
      }
      const double numeric = (loss(zp).value - loss(zm).value) / (2 * eps);
      const double analytic = grad.values(e);
      const double scale = std::max(std::abs(numeric), std::abs(analytic));
      if (scale > kFdRelFloor)
        st.max_rel_error = std::max(st.max_rel_error, std::abs(numeric - analytic) / scale);
      else
        st.max_abs_error = std::max(st.max_abs_error, std::abs(numeric - analytic));
      ++st.checked;
    }
  }
  return st;
}

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("tta-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace tta::testing
