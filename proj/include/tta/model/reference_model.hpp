#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "tta/corpus/features.hpp"
#include "tta/error.hpp"
#include "tta/model/adaptable_model.hpp"
#include "tta/util/hash.hpp"

namespace tta {

inline constexpr const char* kReferenceCheckpointMagic = "TTA-REFMODEL 1";

struct ReferenceModelConfig {
  int feature_dim = 20;  // log-mel bins fed to the front-end
  int hidden = 48;
  int kernel = 3;
  int stride = 2;
  int frame_len = 400;
  int hop = 160;
  double log_floor = 1e-10;
  double norm_eps = 1e-5;
};

/// Desk-scale CTC model:
///   log-mel (fixed) -> input standardization (fixed buffers)
///   -> conv(k3,s2)+GELU -> conv(k3,s2)+GELU      [feature_extractor]
///   -> per-frame layer normalization             [layer_norm]
///   -> linear classifier                          [head]
/// Gradients are analytic. Output frames: L = floor((F1 - k)/s) + 1 with
/// F1 = floor((F - k)/s) + 1 and F the number of 10 ms input frames.
class ReferenceModel final : public ParametricModel {
 public:
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  ReferenceModel(const ReferenceModelConfig& cfg, Vocabulary vocab, std::uint64_t seed)
      : cfg_(cfg), vocab_(std::move(vocab)), front_(front_config(cfg)) {
    vocab_.validate();
    const int d = cfg.feature_dim;
    const int h = cfg.hidden;
    const int c = vocab_.size();
    const int k = cfg.kernel;
    std::mt19937_64 rng(seed);
    auto gaussian = [&](Eigen::Index n, double sd) {
      std::normal_distribution<double> dist(0.0, sd);
      Eigen::VectorXd v(n);
      for (Eigen::Index i = 0; i < n; ++i) v(i) = dist(rng);
      return v;
    };
    params_ = {
        Tensor{"conv1.weight", "feature_extractor", {h, k * d}, gaussian(h * k * d, std::sqrt(2.0 / (k * d)))},
        Tensor{"conv1.bias", "feature_extractor", {h}, Eigen::VectorXd::Zero(h)},
        Tensor{"conv2.weight", "feature_extractor", {h, k * h}, gaussian(h * k * h, std::sqrt(2.0 / (k * h)))},
        Tensor{"conv2.bias", "feature_extractor", {h}, Eigen::VectorXd::Zero(h)},
        Tensor{"norm.gamma", "layer_norm", {h}, Eigen::VectorXd::Ones(h)},
        Tensor{"norm.beta", "layer_norm", {h}, Eigen::VectorXd::Zero(h)},
        Tensor{"head.weight", "head", {c, h}, gaussian(c * h, std::sqrt(1.0 / h))},
        Tensor{"head.bias", "head", {c}, Eigen::VectorXd::Zero(c)},
    };
    input_mean_ = Eigen::VectorXd::Zero(d);
    input_std_ = Eigen::VectorXd::Ones(d);
    selection_.selected = {"feature_extractor", "layer_norm"};
  }

  const ReferenceModelConfig& config() const { return cfg_; }
  const Vocabulary& vocabulary() const override { return vocab_; }
  std::unique_ptr<AdaptableModel> clone() const override { return std::make_unique<ReferenceModel>(*this); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : params_) n += static_cast<std::size_t>(t.values.size());
    return n;
  }

  std::size_t input_frames(std::size_t n_samples) const { return front_.num_frames(n_samples); }

  std::size_t output_frames(std::size_t n_samples) const {
    const auto f = input_frames(n_samples);
    const auto k = static_cast<std::size_t>(cfg_.kernel);
    const auto s = static_cast<std::size_t>(cfg_.stride);
    if (f < k) return 0;
    const auto f1 = (f - k) / s + 1;
    return f1 < k ? 0 : (f1 - k) / s + 1;
  }

  std::size_t min_samples() const override {
    const auto k = static_cast<std::size_t>(cfg_.kernel);
    const auto s = static_cast<std::size_t>(cfg_.stride);
    const auto frames = (k - 1) * s + k;  // input frames for one output frame
    return static_cast<std::size_t>(cfg_.frame_len) + (frames - 1) * static_cast<std::size_t>(cfg_.hop);
  }

  /// Sample index at the centre of output frame `i`'s receptive field.
  double output_frame_center_sample(std::size_t i) const {
    const double k = cfg_.kernel;
    const double s = cfg_.stride;
    const double center_input_frame = s * s * static_cast<double>(i) + (s * (k - 1) + (k - 1)) / 2.0;
    return center_input_frame * cfg_.hop + cfg_.frame_len / 2.0;
  }

  /// Raw log-mel energies (before standardization).
  Eigen::MatrixXd log_mel(const Waveform& w) const {
    if (w.sample_rate_hz != kCanonicalSampleRate)
      throw Error(ErrorKind::UnsupportedFormat, "reference model expects 16 kHz audio");
    if (w.samples.size() < min_samples())
      throw Error(ErrorKind::AudioTooShort, std::to_string(w.samples.size()) + " samples, need " +
                                                std::to_string(min_samples()));
    return front_.compute(w.samples);
  }

  Eigen::MatrixXd features(const Waveform& w) const { return standardize(log_mel(w)); }

  Eigen::MatrixXd standardize(const Eigen::MatrixXd& log_mel) const {
    return (log_mel.rowwise() - input_mean_.transpose()).array().rowwise() / input_std_.transpose().array();
  }

  void set_input_normalization(const Eigen::VectorXd& mean, const Eigen::VectorXd& stddev) {
    if (mean.size() != cfg_.feature_dim || stddev.size() != cfg_.feature_dim)
      throw Error(ErrorKind::ShapeMismatch, "normalization vectors must have feature_dim entries");
    input_mean_ = mean;
    input_std_ = stddev;
  }
  const Eigen::VectorXd& input_mean() const { return input_mean_; }
  const Eigen::VectorXd& input_std() const { return input_std_; }

  LogitMatrix forward(const Waveform& w) const override { return forward_features(features(w)); }

  LogitMatrix forward_features(const Eigen::MatrixXd& x) const {
    Cache cache;
    run(x, cache);
    return LogitMatrix{std::move(cache.z), vocab_.blank_index};
  }

  GradientResult gradient(const Waveform& w, const LossFunctional& loss) const override {
    return gradient_features(features(w), loss, selection_.selected);
  }

  /// Gradient over standardized features for an explicit set of groups
  /// (training uses every group).
  GradientResult gradient_features(const Eigen::MatrixXd& x, const LossFunctional& loss,
                                   const std::vector<std::string>& groups) const {
    Cache cache;
    run(x, cache);
    GradientResult out;
    out.logits = LogitMatrix{cache.z, vocab_.blank_index};
    out.loss = loss(out.logits);
    if (out.loss.d_logits.rows() != cache.z.rows() || out.loss.d_logits.cols() != cache.z.cols())
      throw Error(ErrorKind::ShapeMismatch, "loss gradient shape differs from logits");
    out.gradients = backward(cache, out.loss.d_logits, groups);
    return out;
  }

  std::string fingerprint() const override { return sha256_hex(serialize()); }

  std::string serialize() const {
    nlohmann::json j;
    j["format"] = "tta-reference-model";
    j["version"] = 1;
    j["config"] = {{"feature_dim", cfg_.feature_dim}, {"hidden", cfg_.hidden},       {"kernel", cfg_.kernel},
                   {"stride", cfg_.stride},           {"frame_len", cfg_.frame_len}, {"hop", cfg_.hop},
                   {"log_floor", cfg_.log_floor},     {"norm_eps", cfg_.norm_eps}};
    j["vocabulary"] = {{"symbols", vocab_.symbols},
                       {"blank_index", vocab_.blank_index},
                       {"word_delimiter", vocab_.word_delimiter}};
    auto tensor_json = [](const Tensor& t) {
      return nlohmann::json{{"name", t.name},
                            {"group", t.group},
                            {"shape", t.shape},
                            {"values", std::vector<double>(t.values.data(), t.values.data() + t.values.size())}};
    };
    j["tensors"] = nlohmann::json::array();
    for (const auto& t : params_) j["tensors"].push_back(tensor_json(t));
    j["buffers"] = nlohmann::json::array(
        {tensor_json(Tensor{"input.mean", "buffer", {cfg_.feature_dim}, input_mean_}),
         tensor_json(Tensor{"input.std", "buffer", {cfg_.feature_dim}, input_std_})});
    j["selected_groups"] = selection_.selected;
    return std::string(kReferenceCheckpointMagic) + "\n" + j.dump() + "\n";
  }

  void save_checkpoint(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::UnreadableFile, "cannot write checkpoint " + path.string());
    out << serialize();
  }

  static ReferenceModel deserialize(const std::string& text) {
    const auto nl = text.find('\n');
    if (nl == std::string::npos || text.substr(0, nl) != kReferenceCheckpointMagic)
      throw Error(ErrorKind::BadCheckpoint, "missing checkpoint magic '" + std::string(kReferenceCheckpointMagic) + "'");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text.substr(nl + 1));
      ReferenceModelConfig cfg;
      const auto& c = j.at("config");
      cfg.feature_dim = c.at("feature_dim");
      cfg.hidden = c.at("hidden");
      cfg.kernel = c.at("kernel");
      cfg.stride = c.at("stride");
      cfg.frame_len = c.at("frame_len");
      cfg.hop = c.at("hop");
      cfg.log_floor = c.at("log_floor");
      cfg.norm_eps = c.at("norm_eps");
      Vocabulary v;
      v.symbols = j.at("vocabulary").at("symbols").get<std::vector<std::string>>();
      v.blank_index = j.at("vocabulary").at("blank_index");
      v.word_delimiter = j.at("vocabulary").at("word_delimiter");
      ReferenceModel m(cfg, v, 0);
      auto read_values = [](const nlohmann::json& t, Eigen::Index expected, const std::string& name) {
        const auto vals = t.at("values").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(vals.size()) != expected)
          throw Error(ErrorKind::BadCheckpoint, "tensor " + name + " has wrong size");
        return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(vals.data(), expected));
      };
      for (auto& p : m.params_) {
        const nlohmann::json* found = nullptr;
        for (const auto& t : j.at("tensors"))
          if (t.at("name") == p.name) found = &t;
        if (!found) throw Error(ErrorKind::BadCheckpoint, "checkpoint lacks tensor " + p.name);
        p.values = read_values(*found, p.values.size(), p.name);
      }
      for (const auto& b : j.at("buffers")) {
        const std::string name = b.at("name");
        if (name == "input.mean") m.input_mean_ = read_values(b, cfg.feature_dim, name);
        else if (name == "input.std") m.input_std_ = read_values(b, cfg.feature_dim, name);
      }
      if (j.contains("selected_groups")) m.selection_.selected = j.at("selected_groups").get<std::vector<std::string>>();
      return m;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::BadCheckpoint, e.what());
    }
  }

  static ReferenceModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::UnreadableFile, "cannot open checkpoint " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return deserialize(ss.str());
  }

 private:
  struct Cache {
    Eigen::MatrixXd p1, a1, h1;  // conv1 patches, pre-activation, activation
    Eigen::MatrixXd p2, a2, h2;
    Eigen::VectorXd inv_std;
    Eigen::MatrixXd xhat, y, z;
    Eigen::Index input_frames = 0;
  };

  static LogMelFrontEnd::Config front_config(const ReferenceModelConfig& cfg) {
    LogMelFrontEnd::Config fe;
    fe.frame_len = cfg.frame_len;
    fe.hop = cfg.hop;
    fe.n_mels = cfg.feature_dim;
    fe.log_floor = cfg.log_floor;
    fe.window = WindowKind::hann;
    return fe;
  }

  Eigen::Map<const RowMajor> matrix(const std::string& name) const {
    const Tensor& t = tensor(name);
    return {t.values.data(), t.shape[0], t.shape[1]};
  }

  Eigen::MatrixXd im2col(const Eigen::MatrixXd& x) const {
    const Eigen::Index k = cfg_.kernel;
    const Eigen::Index s = cfg_.stride;
    const Eigen::Index n_out = (x.rows() - k) / s + 1;
    Eigen::MatrixXd p(n_out, k * x.cols());
    for (Eigen::Index i = 0; i < n_out; ++i)
      for (Eigen::Index j = 0; j < k; ++j) p.block(i, j * x.cols(), 1, x.cols()) = x.row(i * s + j);
    return p;
  }

  Eigen::MatrixXd col2im(const Eigen::MatrixXd& dp, Eigen::Index rows, Eigen::Index cols) const {
    const Eigen::Index k = cfg_.kernel;
    const Eigen::Index s = cfg_.stride;
    Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(rows, cols);
    for (Eigen::Index i = 0; i < dp.rows(); ++i)
      for (Eigen::Index j = 0; j < k; ++j) dx.row(i * s + j) += dp.block(i, j * cols, 1, cols);
    return dx;
  }

  static double gelu(double v) { return 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)); }
  static double gelu_grad(double v) {
    const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + v * pdf;
  }

  void run(const Eigen::MatrixXd& x, Cache& c) const {
    const Eigen::Index k = cfg_.kernel;
    if (x.cols() != cfg_.feature_dim) throw Error(ErrorKind::ShapeMismatch, "feature dimension mismatch");
    if (x.rows() < (k - 1) * cfg_.stride + k) throw Error(ErrorKind::AudioTooShort, "too few input frames");
    c.input_frames = x.rows();
    c.p1 = im2col(x);
    c.a1 = (c.p1 * matrix("conv1.weight").transpose()).rowwise() + tensor("conv1.bias").values.transpose();
    c.h1 = c.a1.unaryExpr(&gelu);
    c.p2 = im2col(c.h1);
    c.a2 = (c.p2 * matrix("conv2.weight").transpose()).rowwise() + tensor("conv2.bias").values.transpose();
    c.h2 = c.a2.unaryExpr(&gelu);

    const Eigen::Index h = c.h2.cols();
    const Eigen::VectorXd mu = c.h2.rowwise().mean();
    const Eigen::MatrixXd centered = c.h2.colwise() - mu;
    const Eigen::VectorXd var = centered.array().square().rowwise().sum() / static_cast<double>(h);
    c.inv_std = (var.array() + cfg_.norm_eps).rsqrt();
    c.xhat = centered.array().colwise() * c.inv_std.array();
    const auto& gamma = tensor("norm.gamma").values;
    const auto& beta = tensor("norm.beta").values;
    c.y = (c.xhat.array().rowwise() * gamma.transpose().array()).rowwise() + beta.transpose().array();
    c.z = (c.y * matrix("head.weight").transpose()).rowwise() + tensor("head.bias").values.transpose();
  }

  TensorList backward(const Cache& c, const Eigen::MatrixXd& dz, const std::vector<std::string>& groups) const {
    auto wants = [&](const char* g) { return std::find(groups.begin(), groups.end(), g) != groups.end(); };
    const bool fe = wants("feature_extractor");
    const bool ln = wants("layer_norm");
    const bool head = wants("head");

    std::map<std::string, Eigen::VectorXd> grads;
    auto flat = [](const Eigen::MatrixXd& m) {
      RowMajor r = m;
      return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(r.data(), r.size()));
    };

    if (head) {
      grads["head.weight"] = flat(dz.transpose() * c.y);
      grads["head.bias"] = dz.colwise().sum().transpose();
    }
    if (ln || fe) {
      const Eigen::MatrixXd dy = dz * matrix("head.weight");
      if (ln) {
        grads["norm.gamma"] = (dy.array() * c.xhat.array()).colwise().sum().transpose();
        grads["norm.beta"] = dy.colwise().sum().transpose();
      }
      if (fe) {
        const auto& gamma = tensor("norm.gamma").values;
        const Eigen::MatrixXd dxhat = dy.array().rowwise() * gamma.transpose().array();
        const Eigen::VectorXd mean_d = dxhat.rowwise().mean();
        const Eigen::VectorXd mean_dx = (dxhat.array() * c.xhat.array()).rowwise().mean();
        Eigen::MatrixXd dh2 = dxhat.colwise() - mean_d;
        dh2 -= (c.xhat.array().colwise() * mean_dx.array()).matrix();
        dh2 = dh2.array().colwise() * c.inv_std.array();

        const Eigen::MatrixXd da2 = dh2.array() * c.a2.unaryExpr(&gelu_grad).array();
        grads["conv2.weight"] = flat(da2.transpose() * c.p2);
        grads["conv2.bias"] = da2.colwise().sum().transpose();
        const Eigen::MatrixXd dp2 = da2 * matrix("conv2.weight");
        const Eigen::MatrixXd dh1 = col2im(dp2, c.h1.rows(), c.h1.cols());
        const Eigen::MatrixXd da1 = dh1.array() * c.a1.unaryExpr(&gelu_grad).array();
        grads["conv1.weight"] = flat(da1.transpose() * c.p1);
        grads["conv1.bias"] = da1.colwise().sum().transpose();
      }
    }

    TensorList out;
    for (const auto& p : params_) {
      auto it = grads.find(p.name);
      if (it != grads.end()) out.push_back(Tensor{p.name, p.group, p.shape, std::move(it->second)});
    }
    return out;
  }

  ReferenceModelConfig cfg_;
  Vocabulary vocab_;
  LogMelFrontEnd front_;
  Eigen::VectorXd input_mean_;
  Eigen::VectorXd input_std_;
};

/// Deterministically initialized reference model (untrained).
inline ReferenceModel build_reference_model(std::uint64_t seed, const Vocabulary& v = Vocabulary::characters(),
                                            int feature_dim = 20) {
  ReferenceModelConfig cfg;
  cfg.feature_dim = feature_dim;
  return ReferenceModel(cfg, v, seed);
}

}  // namespace tta
