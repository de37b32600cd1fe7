#pragma once

#include <cmath>
#include <map>
#include <string>

#include "tta/error.hpp"
#include "tta/model/types.hpp"

namespace tta {

enum class OptimizerKind { adam, sgd };

inline const char* to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  throw Error(ErrorKind::InvalidConfig, "unknown optimizer '" + s + "'");
}

/// Turns gradients into parameter deltas. Copying an optimizer copies its
/// moment estimates, so a copy doubles as a state snapshot.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : kind_(kind), lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  TensorList step(const TensorList& gradients) {
    ++t_;
    TensorList deltas;
    deltas.reserve(gradients.size());
    for (const auto& g : gradients) {
      Tensor d{g.name, g.group, g.shape, Eigen::VectorXd()};
      if (kind_ == OptimizerKind::sgd) {
        d.values = -lr_ * g.values;
      } else {
        auto& st = state_[g.name];
        if (st.m.size() != g.values.size()) {
          st.m = Eigen::VectorXd::Zero(g.values.size());
          st.v = Eigen::VectorXd::Zero(g.values.size());
        }
        st.m = beta1_ * st.m + (1.0 - beta1_) * g.values;
        st.v = beta2_ * st.v + (1.0 - beta2_) * g.values.cwiseAbs2();
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        d.values = -lr_ * (st.m / bc1).array() / ((st.v / bc2).array().sqrt() + eps_);
      }
      deltas.push_back(std::move(d));
    }
    return deltas;
  }

  void reset() {
    state_.clear();
    t_ = 0;
  }

  int steps_taken() const { return t_; }
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  struct Moments {
    Eigen::VectorXd m, v;
  };
  OptimizerKind kind_;
  double lr_;
  double beta1_, beta2_, eps_;
  int t_ = 0;
  std::map<std::string, Moments> state_;
};

}  // namespace tta
