#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tta/corpus/wav.hpp"
#include "tta/error.hpp"
#include "tta/model/types.hpp"

namespace tta {

/// Scalar loss of a logit matrix together with its gradient w.r.t. the logits.
struct LossGradient {
  double value = 0.0;
  Eigen::MatrixXd d_logits;
};

using LossFunctional = std::function<LossGradient(const LogitMatrix&)>;

struct GradientResult {
  LogitMatrix logits;  // logits the loss was evaluated on
  LossGradient loss;
  TensorList gradients;  // selected groups only
};

/// Differentiable CTC acoustic model whose parameters are partitioned into
/// named groups. Only the selected groups receive gradients and updates.
class AdaptableModel {
 public:
  virtual ~AdaptableModel() = default;

  virtual LogitMatrix forward(const Waveform& w) const = 0;
  virtual GradientResult gradient(const Waveform& w, const LossFunctional& loss) const = 0;
  /// Adds `deltas` (matched by tensor name) to the parameters.
  virtual void apply_update(const TensorList& deltas) = 0;
  virtual ModelSnapshot snapshot() const = 0;
  virtual void restore(const ModelSnapshot& s) = 0;
  virtual ParameterGroupSpec parameter_groups() const = 0;
  virtual void set_selected_groups(const std::vector<std::string>& groups) = 0;
  virtual const Vocabulary& vocabulary() const = 0;
  /// Independent replica with identical parameters and selection.
  virtual std::unique_ptr<AdaptableModel> clone() const = 0;
  /// Fewest input samples that still yield one logit frame.
  virtual std::size_t min_samples() const = 0;
  /// Stable identifier of the checkpoint the model was built from.
  virtual std::string fingerprint() const = 0;
};

/// Restricts adaptation to `groups`; all other parameters stay frozen.
inline ParameterGroupSpec select_adaptable(AdaptableModel& model, const std::vector<std::string>& groups) {
  const auto spec = model.parameter_groups();
  for (const auto& g : groups) {
    if (std::find(spec.group_names.begin(), spec.group_names.end(), g) == spec.group_names.end())
      throw Error(ErrorKind::UnknownGroup, "model has no parameter group '" + g + "'");
  }
  model.set_selected_groups(groups);
  return model.parameter_groups();
}

/// Shared parameter bookkeeping for models that keep their state in a TensorList.
class ParametricModel : public AdaptableModel {
 public:
  void apply_update(const TensorList& deltas) override {
    for (const auto& d : deltas) {
      Tensor& p = mutable_tensor(d.name);
      if (!selection_.is_selected(p.group))
        throw Error(ErrorKind::UnknownGroup, "tensor '" + d.name + "' belongs to frozen group '" + p.group + "'");
      if (d.values.size() != p.values.size()) throw Error(ErrorKind::ShapeMismatch, "delta size for " + d.name);
      p.values += d.values;
    }
  }

  ModelSnapshot snapshot() const override { return ModelSnapshot{params_}; }

  void restore(const ModelSnapshot& s) override {
    if (s.parameters.size() != params_.size()) throw Error(ErrorKind::ShapeMismatch, "snapshot layout mismatch");
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (s.parameters[i].name != params_[i].name || s.parameters[i].values.size() != params_[i].values.size())
        throw Error(ErrorKind::ShapeMismatch, "snapshot tensor mismatch at " + params_[i].name);
      params_[i].values = s.parameters[i].values;
    }
  }

  ParameterGroupSpec parameter_groups() const override {
    ParameterGroupSpec spec;
    for (const auto& t : params_)
      if (std::find(spec.group_names.begin(), spec.group_names.end(), t.group) == spec.group_names.end())
        spec.group_names.push_back(t.group);
    spec.selected = selection_.selected;
    return spec;
  }

  void set_selected_groups(const std::vector<std::string>& groups) override { selection_.selected = groups; }

  const TensorList& parameters() const { return params_; }
  TensorList& mutable_parameters() { return params_; }

  const Tensor& tensor(const std::string& name) const {
    const Tensor* t = find_tensor(params_, name);
    if (!t) throw Error(ErrorKind::ShapeMismatch, "no tensor named " + name);
    return *t;
  }

 protected:
  Tensor& mutable_tensor(const std::string& name) {
    for (auto& t : params_)
      if (t.name == name) return t;
    throw Error(ErrorKind::ShapeMismatch, "no tensor named " + name);
  }

  bool selected(const std::string& group) const { return selection_.is_selected(group); }

  TensorList params_;
  ParameterGroupSpec selection_;
};

}  // namespace tta
