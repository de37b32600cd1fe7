#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tta/error.hpp"

namespace tta {

/// Frame-level class scores z (L frames x C classes, blank included).
struct LogitMatrix {
  Eigen::MatrixXd values;
  int blank_index = 0;

  Eigen::Index frames() const { return values.rows(); }
  Eigen::Index classes() const { return values.cols(); }
  bool finite() const { return values.allFinite(); }
};

struct Vocabulary {
  std::vector<std::string> symbols;
  int blank_index = 0;
  int word_delimiter = 1;

  int size() const { return static_cast<int>(symbols.size()); }

  int index_of(const std::string& symbol) const {
    auto it = std::find(symbols.begin(), symbols.end(), symbol);
    return it == symbols.end() ? -1 : static_cast<int>(it - symbols.begin());
  }

  void validate() const {
    if (symbols.size() < 2) throw Error(ErrorKind::ShapeMismatch, "vocabulary needs at least two symbols");
    if (blank_index < 0 || blank_index >= size()) throw Error(ErrorKind::ShapeMismatch, "blank index out of range");
    if (word_delimiter >= size()) throw Error(ErrorKind::ShapeMismatch, "word delimiter out of range");
    auto sorted = symbols;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw Error(ErrorKind::ShapeMismatch, "vocabulary symbols must be distinct");
  }

  /// 29 classes: blank, word delimiter '|', apostrophe, A-Z.
  static Vocabulary characters() {
    Vocabulary v;
    v.symbols = {"<blank>", "|", "'"};
    for (char c = 'A'; c <= 'Z'; ++c) v.symbols.emplace_back(1, c);
    v.blank_index = 0;
    v.word_delimiter = 1;
    return v;
  }
};

/// A named parameter tensor; values are stored flat in row-major order.
struct Tensor {
  std::string name;
  std::string group;
  std::vector<Eigen::Index> shape;
  Eigen::VectorXd values;

  Eigen::Index numel() const {
    Eigen::Index n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.name == b.name && a.group == b.group && a.shape == b.shape && a.values.size() == b.values.size() &&
           (a.values.size() == 0 ||
            std::memcmp(a.values.data(), b.values.data(), sizeof(double) * static_cast<std::size_t>(a.values.size())) == 0);
  }
};

using TensorList = std::vector<Tensor>;

inline const Tensor* find_tensor(const TensorList& list, const std::string& name) {
  for (const auto& t : list)
    if (t.name == name) return &t;
  return nullptr;
}

struct ParameterGroupSpec {
  std::vector<std::string> group_names;
  std::vector<std::string> selected;

  bool is_selected(const std::string& group) const {
    return std::find(selected.begin(), selected.end(), group) != selected.end();
  }
};

/// Exact numeric state of every parameter; restoring it is bit-exact.
struct ModelSnapshot {
  TensorList parameters;

  friend bool operator==(const ModelSnapshot&, const ModelSnapshot&) = default;
};

/// Largest absolute elementwise difference between two snapshots of the same model.
inline double max_abs_diff(const ModelSnapshot& a, const ModelSnapshot& b) {
  if (a.parameters.size() != b.parameters.size()) throw Error(ErrorKind::ShapeMismatch, "snapshot layouts differ");
  double m = 0.0;
  for (std::size_t i = 0; i < a.parameters.size(); ++i) {
    const auto& x = a.parameters[i].values;
    const auto& y = b.parameters[i].values;
    if (x.size() != y.size()) throw Error(ErrorKind::ShapeMismatch, "tensor sizes differ");
    if (x.size()) m = std::max(m, (x - y).cwiseAbs().maxCoeff());
  }
  return m;
}

}  // namespace tta
