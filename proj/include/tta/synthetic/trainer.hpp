#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "tta/engine/optimizer.hpp"
#include "tta/model/reference_model.hpp"
#include "tta/synthetic/desk_corpus.hpp"

namespace tta {

/// Output-frame targets from a known alignment: the symbol whose span holds
/// the centre of the frame's receptive field, blank otherwise.
inline std::vector<int> frame_targets(const ReferenceModel& model, const RenderedUtterance& u) {
  const auto frames = model.output_frames(u.audio.samples.size());
  std::vector<int> targets(frames, model.vocabulary().blank_index);
  for (std::size_t i = 0; i < frames; ++i) {
    const double centre = model.output_frame_center_sample(i);
    for (const auto& s : u.spans) {
      if (centre >= static_cast<double>(s.start) && centre < static_cast<double>(s.end)) {
        targets[i] = s.symbol;
        break;
      }
    }
  }
  return targets;
}

struct TrainingExample {
  Eigen::MatrixXd log_mel;  // raw, standardized at training time
  std::vector<int> targets;
};

/// Mean frame-level cross entropy and its logit gradient.
inline LossGradient frame_cross_entropy(const LogitMatrix& z, const std::vector<int>& targets) {
  LossGradient out;
  const Eigen::Index frames = z.frames();
  out.d_logits.resize(frames, z.classes());
  for (Eigen::Index i = 0; i < frames; ++i) {
    const Eigen::RowVectorXd row = z.values.row(i);
    const double m = row.maxCoeff();
    const Eigen::RowVectorXd e = (row.array() - m).exp();
    const double sum = e.sum();
    const int y = targets[static_cast<std::size_t>(i)];
    out.value += -(row(y) - m - std::log(sum));
    out.d_logits.row(i) = e / sum;
    out.d_logits(i, y) -= 1.0;
  }
  out.value /= static_cast<double>(frames);
  out.d_logits /= static_cast<double>(frames);
  return out;
}

struct TrainerConfig {
  int epochs = 12;
  int batch_size = 8;
  double learning_rate = 3e-3;
  std::uint64_t seed = 7;
};

/// Fits input standardization on the training features, then trains every
/// parameter group with Adam on frame-level cross entropy. Returns the mean
/// loss of the last epoch.
inline double train_reference_model(ReferenceModel& model, const std::vector<TrainingExample>& data,
                                    const TrainerConfig& cfg) {
  if (data.empty()) throw Error(ErrorKind::EmptyList, "no training examples");
  const Eigen::Index d = data.front().log_mel.cols();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(d);
  double count = 0.0;
  for (const auto& ex : data) {
    sum += ex.log_mel.colwise().sum().transpose();
    sq += ex.log_mel.array().square().colwise().sum().matrix().transpose();
    count += static_cast<double>(ex.log_mel.rows());
  }
  const Eigen::VectorXd mean = sum / count;
  const Eigen::VectorXd stddev = (sq / count - mean.cwiseAbs2()).cwiseMax(1e-6).cwiseSqrt();
  model.set_input_normalization(mean, stddev);

  std::vector<Eigen::MatrixXd> inputs;
  for (const auto& ex : data) inputs.push_back(model.standardize(ex.log_mel));

  const std::vector<std::string> all_groups = model.parameter_groups().group_names;
  const auto previous_selection = model.parameter_groups().selected;
  model.set_selected_groups(all_groups);

  Optimizer opt(OptimizerKind::adam, cfg.learning_rate);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double epoch_loss = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    // Cosine decay keeps the last epochs stable.
    opt.set_learning_rate(cfg.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * epoch / cfg.epochs)));
    epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      TensorList accum;
      for (std::size_t b = start; b < end; ++b) {
        const auto& ex = data[order[b]];
        auto g = model.gradient_features(
            inputs[order[b]], [&](const LogitMatrix& z) { return frame_cross_entropy(z, ex.targets); }, all_groups);
        epoch_loss += g.loss.value;
        if (accum.empty()) accum = std::move(g.gradients);
        else
          for (std::size_t t = 0; t < accum.size(); ++t) accum[t].values += g.gradients[t].values;
      }
      for (auto& t : accum) t.values /= static_cast<double>(end - start);
      model.apply_update(opt.step(accum));
    }
    epoch_loss /= static_cast<double>(data.size());
  }
  model.set_selected_groups(previous_selection);
  return epoch_loss;
}

}  // namespace tta
