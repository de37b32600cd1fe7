#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "tta/engine/optimizer.hpp"
#include "tta/error.hpp"
#include "tta/util/hash.hpp"

namespace tta {

enum class Method { none, suta, sgem };
enum class AdaptMode { episodic, continual };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::none: return "none";
    case Method::suta: return "suta";
    case Method::sgem: return "sgem";
  }
  return "none";
}

inline Method parse_method(const std::string& s) {
  if (s == "none" || s == "unadapted") return Method::none;
  if (s == "suta") return Method::suta;
  if (s == "sgem") return Method::sgem;
  throw Error(ErrorKind::InvalidConfig, "unknown method '" + s + "'");
}

inline const char* to_string(AdaptMode m) { return m == AdaptMode::episodic ? "episodic" : "continual"; }

inline AdaptMode parse_mode(const std::string& s) {
  if (s == "episodic") return AdaptMode::episodic;
  if (s == "continual") return AdaptMode::continual;
  throw Error(ErrorKind::InvalidConfig, "unknown mode '" + s + "'");
}

struct AdaptationConfig {
  Method method = Method::suta;
  int steps_n = 10;
  double alpha = 0.3;
  double lambda = 0.3;
  double temperature = 2.5;
  double rho = 0.5;
  int neg_k = 5;
  AdaptMode mode = AdaptMode::episodic;
  double learning_rate = 2e-4;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::vector<std::string> adapted_groups = {"feature_extractor", "layer_norm"};
  std::uint64_t seed = 0;
  bool exclude_blank_frames = false;
  // Utterances longer than chunk_threshold_s are adapted in windows of at most chunk_max_s.
  double chunk_threshold_s = 60.0;
  double chunk_max_s = 30.0;

  void validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorKind::InvalidConfig, m); };
    if (steps_n < 1) fail("steps_n must be >= 1");
    if (!(alpha >= 0.0 && alpha <= 1.0)) fail("alpha must lie in [0, 1]");
    if (!(lambda >= 0.0)) fail("lambda must be >= 0");
    if (!(temperature > 0.0)) fail("temperature must be > 0");
    if (!(rho > 0.0) || rho == 1.0) fail("rho must be > 0 and != 1");
    if (neg_k < 1) fail("neg_k must be >= 1");
    if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
    if (method != Method::none && adapted_groups.empty()) fail("adapted_groups must be non-empty");
    if (!(chunk_max_s > 0.0) || chunk_threshold_s < chunk_max_s) fail("chunking parameters are inconsistent");
  }
};

inline nlohmann::json to_json(const AdaptationConfig& c) {
  return nlohmann::json{{"method", to_string(c.method)},
                        {"steps_n", c.steps_n},
                        {"alpha", c.alpha},
                        {"lambda", c.lambda},
                        {"temperature", c.temperature},
                        {"rho", c.rho},
                        {"neg_k", c.neg_k},
                        {"mode", to_string(c.mode)},
                        {"learning_rate", c.learning_rate},
                        {"optimizer", to_string(c.optimizer)},
                        {"adapted_groups", c.adapted_groups},
                        {"seed", c.seed},
                        {"exclude_blank_frames", c.exclude_blank_frames},
                        {"chunk_threshold_s", c.chunk_threshold_s},
                        {"chunk_max_s", c.chunk_max_s}};
}

/// Fields absent from `j` keep the values already in `base`.
inline AdaptationConfig adaptation_config_from_json(const nlohmann::json& j, AdaptationConfig base = {}) {
  try {
    if (j.contains("method")) base.method = parse_method(j.at("method"));
    if (j.contains("steps_n")) base.steps_n = j.at("steps_n");
    if (j.contains("alpha")) base.alpha = j.at("alpha");
    if (j.contains("lambda")) base.lambda = j.at("lambda");
    if (j.contains("temperature")) base.temperature = j.at("temperature");
    if (j.contains("rho")) base.rho = j.at("rho");
    if (j.contains("neg_k")) base.neg_k = j.at("neg_k");
    if (j.contains("mode")) base.mode = parse_mode(j.at("mode"));
    if (j.contains("learning_rate")) base.learning_rate = j.at("learning_rate");
    if (j.contains("optimizer")) base.optimizer = parse_optimizer(j.at("optimizer"));
    if (j.contains("adapted_groups")) base.adapted_groups = j.at("adapted_groups").get<std::vector<std::string>>();
    if (j.contains("seed")) base.seed = j.at("seed");
    if (j.contains("exclude_blank_frames")) base.exclude_blank_frames = j.at("exclude_blank_frames");
    if (j.contains("chunk_threshold_s")) base.chunk_threshold_s = j.at("chunk_threshold_s");
    if (j.contains("chunk_max_s")) base.chunk_max_s = j.at("chunk_max_s");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, e.what());
  }
  return base;
}

/// Stable under re-serialization: keys are emitted sorted and doubles round-trip.
inline std::string config_fingerprint(const AdaptationConfig& c) { return sha256_hex(to_json(c).dump()); }

}  // namespace tta
