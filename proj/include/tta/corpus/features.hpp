#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "tta/corpus/wav.hpp"
#include "tta/error.hpp"
#include "tta/util/format.hpp"

namespace tta {

enum class FeatureKind { mfcc, log_mel };

struct FeatureMatrix {
  Eigen::MatrixXd frames;  // T x D
  double frame_hop_s = 0.01;
  FeatureKind feature_kind = FeatureKind::mfcc;

  Eigen::Index num_frames() const { return frames.rows(); }
  Eigen::Index dim() const { return frames.cols(); }
};

/// Number of full frames of `frame_len` samples at stride `hop` in `n` samples.
inline std::size_t frame_count(std::size_t n, std::size_t frame_len, std::size_t hop) {
  return n < frame_len ? 0 : (n - frame_len) / hop + 1;
}

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Centre frequency of triangular filter `index` for a bank of `n_mels`
/// filters spanning [0, sample_rate/2].
inline double mel_center_hz(int index, int n_mels, int sample_rate_hz) {
  const double top = hz_to_mel(sample_rate_hz / 2.0);
  return mel_to_hz(top * (index + 1) / (n_mels + 1));
}

/// Triangular mel filters (unnormalized peak 1) evaluated on FFT bin centres.
inline Eigen::MatrixXd mel_filterbank(int n_mels, int n_fft, int sample_rate_hz) {
  const int bins = n_fft / 2 + 1;
  const double top = hz_to_mel(sample_rate_hz / 2.0);
  std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
  for (int i = 0; i < n_mels + 2; ++i) edges[static_cast<std::size_t>(i)] = mel_to_hz(top * i / (n_mels + 1));
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n_mels, bins);
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[static_cast<std::size_t>(m)];
    const double mid = edges[static_cast<std::size_t>(m) + 1];
    const double hi = edges[static_cast<std::size_t>(m) + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate_hz / n_fft;
      if (f > lo && f < mid) w(m, k) = (f - lo) / (mid - lo);
      else if (f >= mid && f < hi) w(m, k) = (hi - f) / (hi - mid);
    }
  }
  return w;
}

enum class WindowKind { hann, hamming };

/// Short-time log mel energies. Stateless after construction, so one
/// instance may be shared across threads.
class LogMelFrontEnd {
 public:
  struct Config {
    int sample_rate_hz = kCanonicalSampleRate;
    int frame_len = 400;
    int hop = 160;
    int n_mels = 26;
    double log_floor = 1e-10;
    WindowKind window = WindowKind::hamming;
  };

  explicit LogMelFrontEnd(const Config& cfg) : cfg_(cfg) {
    if (cfg.frame_len <= 0 || cfg.hop <= 0 || cfg.hop > cfg.frame_len || cfg.n_mels <= 0)
      throw Error(ErrorKind::InvalidConfig, "invalid framing configuration");
    n_fft_ = 1;
    while (n_fft_ < cfg.frame_len) n_fft_ *= 2;
    window_.resize(static_cast<std::size_t>(cfg.frame_len));
    const double a0 = cfg.window == WindowKind::hann ? 0.5 : 0.54;
    for (int i = 0; i < cfg.frame_len; ++i)
      window_[static_cast<std::size_t>(i)] =
          a0 - (1.0 - a0) * std::cos(2.0 * std::numbers::pi * i / (cfg.frame_len - 1));
    filters_ = mel_filterbank(cfg.n_mels, n_fft_, cfg.sample_rate_hz);
  }

  const Config& config() const { return cfg_; }
  std::size_t num_frames(std::size_t n_samples) const {
    return frame_count(n_samples, static_cast<std::size_t>(cfg_.frame_len), static_cast<std::size_t>(cfg_.hop));
  }

  Eigen::MatrixXd compute(std::span<const double> samples) const {
    const auto frames = num_frames(samples.size());
    if (frames == 0)
      throw Error(ErrorKind::AudioTooShort, std::to_string(samples.size()) + " samples is shorter than one frame");
    Eigen::FFT<double> fft;
    std::vector<double> buf(static_cast<std::size_t>(n_fft_));
    std::vector<std::complex<double>> spec;
    Eigen::VectorXd power(n_fft_ / 2 + 1);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(frames), cfg_.n_mels);
    for (std::size_t t = 0; t < frames; ++t) {
      std::fill(buf.begin(), buf.end(), 0.0);
      const std::size_t start = t * static_cast<std::size_t>(cfg_.hop);
      for (int i = 0; i < cfg_.frame_len; ++i)
        buf[static_cast<std::size_t>(i)] = samples[start + static_cast<std::size_t>(i)] * window_[static_cast<std::size_t>(i)];
      fft.fwd(spec, buf);
      for (int k = 0; k <= n_fft_ / 2; ++k) power(k) = std::norm(spec[static_cast<std::size_t>(k)]);
      const Eigen::VectorXd mel = filters_ * power;
      for (int m = 0; m < cfg_.n_mels; ++m)
        out(static_cast<Eigen::Index>(t), m) = std::log(std::max(mel(m), cfg_.log_floor));
    }
    return out;
  }

 private:
  Config cfg_;
  int n_fft_ = 512;
  std::vector<double> window_;
  Eigen::MatrixXd filters_;
};

/// Orthonormal DCT-II basis, `n_out` x `n_in`.
inline Eigen::MatrixXd dct_matrix(int n_out, int n_in) {
  Eigen::MatrixXd d(n_out, n_in);
  for (int k = 0; k < n_out; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n_in) : std::sqrt(2.0 / n_in);
    for (int n = 0; n < n_in; ++n) d(k, n) = scale * std::cos(std::numbers::pi * k * (n + 0.5) / n_in);
  }
  return d;
}

struct MfccConfig {
  int n_coeffs = 13;
  double frame_len_s = 0.025;
  double frame_hop_s = 0.010;
  int n_mels = 26;
  double log_floor = 1e-10;
};

/// MFCCs of a waveform: Hamming-windowed frames, mel power spectrum, log with
/// floor, orthonormal DCT. T = floor((len - frame_len) / hop) + 1.
inline FeatureMatrix compute_mfcc(const Waveform& w, const MfccConfig& cfg = {}) {
  if (cfg.n_coeffs <= 0 || cfg.n_coeffs > cfg.n_mels)
    throw Error(ErrorKind::InvalidConfig, "n_coeffs must be in [1, n_mels]");
  if (!(cfg.frame_hop_s > 0.0) || cfg.frame_len_s < cfg.frame_hop_s)
    throw Error(ErrorKind::InvalidConfig, "frame length must be at least the hop");
  if (w.samples.empty()) throw Error(ErrorKind::AudioTooShort, "empty waveform");
  LogMelFrontEnd::Config fe;
  fe.sample_rate_hz = w.sample_rate_hz;
  fe.frame_len = static_cast<int>(std::lround(cfg.frame_len_s * w.sample_rate_hz));
  fe.hop = static_cast<int>(std::lround(cfg.frame_hop_s * w.sample_rate_hz));
  fe.n_mels = cfg.n_mels;
  fe.log_floor = cfg.log_floor;
  fe.window = WindowKind::hamming;
  const LogMelFrontEnd front(fe);
  const Eigen::MatrixXd log_mel = front.compute(w.samples);
  FeatureMatrix out;
  out.frames = log_mel * dct_matrix(cfg.n_coeffs, cfg.n_mels).transpose();
  out.frame_hop_s = cfg.frame_hop_s;
  out.feature_kind = FeatureKind::mfcc;
  return out;
}

inline FeatureMatrix compute_mfcc(const Waveform& w, int n_coeffs, double frame_len_s, double frame_hop_s) {
  MfccConfig cfg;
  cfg.n_coeffs = n_coeffs;
  cfg.frame_len_s = frame_len_s;
  cfg.frame_hop_s = frame_hop_s;
  cfg.n_mels = std::max(cfg.n_mels, n_coeffs);
  return compute_mfcc(w, cfg);
}

/// Feature dump rows: utterance_id, frame_index, c0..cD-1.
inline std::string feature_csv_header(Eigen::Index dim) {
  std::string s = "utterance_id,frame_index";
  for (Eigen::Index d = 0; d < dim; ++d) s += ",c" + std::to_string(d);
  return s + "\n";
}

inline std::string feature_csv_rows(const std::string& utterance_id, const FeatureMatrix& f) {
  std::string s;
  for (Eigen::Index t = 0; t < f.frames.rows(); ++t) {
    s += csv_escape(utterance_id) + "," + std::to_string(t);
    for (Eigen::Index d = 0; d < f.frames.cols(); ++d) s += "," + format_double(f.frames(t, d));
    s += "\n";
  }
  return s;
}

}  // namespace tta
