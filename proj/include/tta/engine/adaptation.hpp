#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "tta/corpus/manifest.hpp"
#include "tta/corpus/vad.hpp"
#include "tta/corpus/wav.hpp"
#include "tta/engine/config.hpp"
#include "tta/engine/optimizer.hpp"
#include "tta/error.hpp"
#include "tta/evaluation/wer.hpp"
#include "tta/model/adaptable_model.hpp"
#include "tta/model/ctc.hpp"
#include "tta/objectives/losses.hpp"

namespace tta {

struct StepRecord {
  double total = 0.0;
  std::map<std::string, double> components;
};

struct AdaptationTrace {
  std::vector<StepRecord> steps;  // steps_n per adapted chunk
  std::optional<double> initial_total;
  std::optional<double> final_total;
  double wall_time_s = 0.0;
  bool parameters_restored = false;
  int chunks = 0;
};

struct UtteranceAdaptation {
  std::string hypothesis;
  AdaptationTrace trace;
};

/// Loss selected by `cfg` as a functional over logits. The most recent
/// evaluation is written to `last` when given.
inline LossFunctional make_loss_functional(const AdaptationConfig& cfg, TtaLossValue* last = nullptr) {
  return [cfg, last](const LogitMatrix& z) {
    const FrameFilter filter{cfg.exclude_blank_frames};
    TtaLossResult r = cfg.method == Method::sgem
                          ? sgem_loss_with_grad(z, cfg.lambda, cfg.rho, cfg.temperature, cfg.neg_k, filter)
                          : suta_loss_with_grad(z, cfg.alpha, cfg.temperature, filter);
    if (last) *last = r.value;
    return LossGradient{r.value.total, std::move(r.d_logits)};
  };
}

/// Splits audio longer than `threshold_s` into windows of at most `max_s`,
/// cutting at the middle of the latest non-speech gap inside each window when
/// one exists. Short tails are merged into the previous window.
inline std::vector<Waveform> split_for_adaptation(const Waveform& w, double threshold_s, double max_s,
                                                  std::size_t min_samples, const VadProvider& vad = default_vad_provider()) {
  if (w.duration_s() <= threshold_s) return {w};
  const auto gaps = detect_nonspeech(w, vad).segments;
  const auto sr = static_cast<double>(w.sample_rate_hz);
  const auto n = w.samples.size();
  const auto max_len = static_cast<std::size_t>(max_s * sr);
  std::vector<std::size_t> cuts;
  std::size_t cursor = 0;
  while (n - cursor > max_len) {
    std::size_t cut = cursor + max_len;
    for (const auto& g : gaps) {
      const auto mid = static_cast<std::size_t>(0.5 * (g.start_s + g.end_s) * sr);
      if (mid > cursor + max_len / 2 && mid <= cursor + max_len) cut = mid;
    }
    cuts.push_back(cut);
    cursor = cut;
  }
  if (!cuts.empty() && n - cuts.back() < min_samples) cuts.pop_back();
  std::vector<Waveform> out;
  std::size_t start = 0;
  cuts.push_back(n);
  for (auto c : cuts) {
    Waveform piece;
    piece.sample_rate_hz = w.sample_rate_hz;
    piece.samples.assign(w.samples.begin() + static_cast<std::ptrdiff_t>(start), w.samples.begin() + static_cast<std::ptrdiff_t>(c));
    out.push_back(std::move(piece));
    start = c;
  }
  return out;
}

/// Unsupervised adaptation on one utterance: snapshot, steps_n optimizer
/// steps on the configured loss, decode from the adapted model, and restore
/// in episodic mode. `carried` supplies the optimizer that persists across a
/// speaker's utterances in continual mode; episodic runs use a fresh one.
/// On a non-finite loss the snapshot is restored before NonFiniteLoss is thrown.
inline UtteranceAdaptation adapt_utterance(AdaptableModel& model, const Waveform& w, const AdaptationConfig& cfg,
                                           Optimizer* carried = nullptr) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  if (w.samples.size() < model.min_samples())
    throw Error(ErrorKind::AudioTooShort, std::to_string(w.samples.size()) + " samples is too short to decode");

  UtteranceAdaptation out;
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

  if (cfg.method == Method::none) {
    out.hypothesis = greedy_ctc_decode(model.forward(w), model.vocabulary());
    out.trace.parameters_restored = cfg.mode == AdaptMode::episodic;
    out.trace.wall_time_s = elapsed();
    return out;
  }

  select_adaptable(model, cfg.adapted_groups);
  const ModelSnapshot snapshot = model.snapshot();
  std::optional<Optimizer> local;
  Optimizer* opt = carried;
  if (cfg.mode == AdaptMode::episodic || opt == nullptr) {
    local.emplace(cfg.optimizer, cfg.learning_rate);
    opt = &*local;
  }
  const std::optional<Optimizer> optimizer_before = carried ? std::optional<Optimizer>(*carried) : std::nullopt;

  auto abort_nonfinite = [&](const std::string& where) {
    model.restore(snapshot);
    if (carried && optimizer_before) *carried = *optimizer_before;
    throw Error(ErrorKind::NonFiniteLoss, "non-finite value " + where);
  };

  TtaLossValue last;
  const auto loss = make_loss_functional(cfg, &last);
  const auto chunks = split_for_adaptation(w, cfg.chunk_threshold_s, cfg.chunk_max_s, model.min_samples());
  double initial_sum = 0.0;
  double final_sum = 0.0;
  std::vector<std::string> pieces;
  for (const auto& chunk : chunks) {
    for (int step = 0; step < cfg.steps_n; ++step) {
      GradientResult g = model.gradient(chunk, loss);
      if (!std::isfinite(g.loss.value)) abort_nonfinite("in loss at step " + std::to_string(step));
      for (const auto& t : g.gradients)
        if (!t.values.allFinite()) abort_nonfinite("in gradient of " + t.name);
      if (step == 0) initial_sum += g.loss.value;
      out.trace.steps.push_back(StepRecord{last.total, last.components});
      model.apply_update(opt->step(g.gradients));
    }
    const LogitMatrix z = model.forward(chunk);
    const double final_loss = loss(z).value;
    if (!std::isfinite(final_loss) || !z.finite()) abort_nonfinite("after adaptation");
    final_sum += final_loss;
    pieces.push_back(greedy_ctc_decode(z, model.vocabulary()));
  }
  for (const auto& p : pieces) {
    if (p.empty()) continue;
    if (!out.hypothesis.empty()) out.hypothesis += ' ';
    out.hypothesis += p;
  }
  const double n_chunks = static_cast<double>(chunks.size());
  out.trace.chunks = static_cast<int>(chunks.size());
  out.trace.initial_total = initial_sum / n_chunks;
  out.trace.final_total = final_sum / n_chunks;
  if (cfg.mode == AdaptMode::episodic) {
    model.restore(snapshot);
    out.trace.parameters_restored = true;
  }
  out.trace.wall_time_s = elapsed();
  return out;
}

enum class UtteranceStatus { ok, no_reference, nonfinite_loss, audio_too_short, failed };

inline const char* to_string(UtteranceStatus s) {
  switch (s) {
    case UtteranceStatus::ok: return "ok";
    case UtteranceStatus::no_reference: return "no_reference";
    case UtteranceStatus::nonfinite_loss: return "nonfinite_loss";
    case UtteranceStatus::audio_too_short: return "audio_too_short";
    case UtteranceStatus::failed: return "failed";
  }
  return "failed";
}

struct UtteranceResult {
  std::string utterance_id;
  std::string hypothesis;
  std::string reference;
  WerCount counts;
  AdaptationTrace trace;
  UtteranceStatus status = UtteranceStatus::ok;
  std::string message;

  bool scored() const { return status == UtteranceStatus::ok; }
};

struct SpeakerRunResult {
  std::string speaker_id;
  std::vector<UtteranceResult> utterances;
  std::string config_fingerprint;

  std::vector<WerCount> scored_counts() const {
    std::vector<WerCount> c;
    for (const auto& u : utterances)
      if (u.scored()) c.push_back(u.counts);
    return c;
  }
  bool has_flagged() const {
    for (const auto& u : utterances)
      if (u.status != UtteranceStatus::ok && u.status != UtteranceStatus::no_reference) return true;
    return false;
  }
};

using AudioLoader = std::function<Waveform(const Utterance&)>;

inline AudioLoader manifest_audio_loader(const std::filesystem::path& base_dir) {
  return [base_dir](const Utterance& u) {
    std::filesystem::path p(u.audio_path);
    return read_audio(p.is_absolute() || base_dir.empty() ? p : base_dir / p);
  };
}

/// Adapts and scores one speaker's utterances in order. Per-utterance
/// failures become flagged entries. Parameters are back at their starting
/// values afterwards in both modes.
inline SpeakerRunResult adapt_speaker(AdaptableModel& model, const std::vector<Utterance>& utterances,
                                      const AdaptationConfig& cfg, const AudioLoader& loader) {
  cfg.validate();
  SpeakerRunResult result;
  result.config_fingerprint = config_fingerprint(cfg);
  if (utterances.empty()) return result;
  result.speaker_id = utterances.front().speaker_id;
  for (const auto& u : utterances)
    if (u.speaker_id != result.speaker_id)
      throw Error(ErrorKind::InvalidConfig, "adapt_speaker given utterances from several speakers");

  const ModelSnapshot base = model.snapshot();
  Optimizer carried(cfg.optimizer, cfg.learning_rate);
  for (const auto& u : utterances) {
    UtteranceResult r;
    r.utterance_id = u.utterance_id;
    r.reference = u.transcript;
    try {
      const Waveform w = loader(u);
      auto adapted = adapt_utterance(model, w, cfg, cfg.mode == AdaptMode::continual ? &carried : nullptr);
      r.hypothesis = std::move(adapted.hypothesis);
      r.trace = std::move(adapted.trace);
      if (tokenize(u.transcript).empty()) {
        r.status = UtteranceStatus::no_reference;
        r.counts.insertions = static_cast<std::int64_t>(tokenize(r.hypothesis).size());
      } else {
        r.counts = wer(u.transcript, r.hypothesis);
      }
    } catch (const Error& e) {
      r.status = e.kind() == ErrorKind::NonFiniteLoss   ? UtteranceStatus::nonfinite_loss
                 : e.kind() == ErrorKind::AudioTooShort ? UtteranceStatus::audio_too_short
                                                        : UtteranceStatus::failed;
      r.message = e.what();
    }
    result.utterances.push_back(std::move(r));
  }
  model.restore(base);
  return result;
}

struct ExperimentOptions {
  int workers = 1;
  AudioLoader loader;  // defaults to reading manifest audio paths
  /// Speakers to skip (already completed in a resumed run).
  std::function<bool(const std::string&)> skip_speaker;
  /// Invoked once per finished speaker, serialized across workers.
  std::function<void(std::size_t index, const SpeakerRunResult&)> on_speaker_done;
};

/// One result per speaker (first-appearance order). Each speaker runs on its
/// own replica of `model`, so results do not depend on the worker count.
inline std::vector<SpeakerRunResult> run_experiment(const CorpusManifest& manifest, const AdaptableModel& model,
                                                    const AdaptationConfig& cfg, const ExperimentOptions& options = {}) {
  cfg.validate();
  if (manifest.split != Split::test) throw Error(ErrorKind::InvalidConfig, "run_experiment expects a test split");
  if (cfg.method != Method::none) {
    auto probe = model.clone();
    select_adaptable(*probe, cfg.adapted_groups);
  }
  const auto groups = group_by_speaker(manifest);
  const AudioLoader loader = options.loader ? options.loader : manifest_audio_loader(manifest.base_dir);

  std::vector<SpeakerRunResult> results(groups.size());
  std::vector<bool> done(groups.size(), false);
  std::atomic<std::size_t> next{0};
  std::mutex callback_mutex;
  auto worker = [&] {
    auto replica = model.clone();
    for (std::size_t i = next++; i < groups.size(); i = next++) {
      if (options.skip_speaker && options.skip_speaker(groups[i].speaker_id)) continue;
      results[i] = adapt_speaker(*replica, groups[i].utterances, cfg, loader);
      results[i].speaker_id = groups[i].speaker_id;
      done[i] = true;
      if (options.on_speaker_done) {
        std::lock_guard lock(callback_mutex);
        options.on_speaker_done(i, results[i]);
      }
    }
  };
  const int workers = std::max(1, std::min<int>(options.workers, static_cast<int>(groups.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  std::vector<SpeakerRunResult> out;
  for (std::size_t i = 0; i < groups.size(); ++i)
    if (done[i]) out.push_back(std::move(results[i]));
  return out;
}

/// One JSON-lines record per utterance; wall time is left out so that reruns
/// are byte-identical.
inline nlohmann::json utterance_record(const std::string& speaker_id, const UtteranceResult& r) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& s : r.trace.steps) {
    nlohmann::json step = s.components;
    step["total"] = s.total;
    trace.push_back(step);
  }
  nlohmann::json j{{"utterance_id", r.utterance_id},
                   {"speaker_id", speaker_id},
                   {"hypothesis", r.hypothesis},
                   {"reference", r.reference},
                   {"S", r.counts.substitutions},
                   {"D", r.counts.deletions},
                   {"I", r.counts.insertions},
                   {"N", r.counts.reference_words},
                   {"status", to_string(r.status)},
                   {"loss_trace", trace},
                   {"parameters_restored", r.trace.parameters_restored},
                   {"chunks", r.trace.chunks}};
  j["initial_loss"] = r.trace.initial_total ? nlohmann::json(*r.trace.initial_total) : nlohmann::json(nullptr);
  j["final_loss"] = r.trace.final_total ? nlohmann::json(*r.trace.final_total) : nlohmann::json(nullptr);
  if (!r.message.empty()) j["message"] = r.message;
  return j;
}

inline UtteranceStatus parse_status(const std::string& s) {
  for (auto st : {UtteranceStatus::ok, UtteranceStatus::no_reference, UtteranceStatus::nonfinite_loss,
                  UtteranceStatus::audio_too_short, UtteranceStatus::failed})
    if (s == to_string(st)) return st;
  return UtteranceStatus::failed;
}

/// Inverse of utterance_record for the fields scoring needs.
inline std::pair<std::string, UtteranceResult> parse_utterance_record(const nlohmann::json& j) {
  UtteranceResult r;
  r.utterance_id = j.at("utterance_id");
  r.hypothesis = j.at("hypothesis");
  r.reference = j.at("reference");
  r.counts = WerCount{j.at("S"), j.at("D"), j.at("I"), j.at("N")};
  r.status = parse_status(j.at("status"));
  r.trace.parameters_restored = j.value("parameters_restored", false);
  r.trace.chunks = j.value("chunks", 0);
  if (j.contains("initial_loss") && !j.at("initial_loss").is_null()) r.trace.initial_total = j.at("initial_loss").get<double>();
  if (j.contains("final_loss") && !j.at("final_loss").is_null()) r.trace.final_total = j.at("final_loss").get<double>();
  for (const auto& s : j.value("loss_trace", nlohmann::json::array())) {
    StepRecord rec;
    for (auto it = s.begin(); it != s.end(); ++it) {
      if (it.key() == "total") rec.total = it.value();
      else rec.components[it.key()] = it.value();
    }
    r.trace.steps.push_back(std::move(rec));
  }
  r.message = j.value("message", "");
  return {j.at("speaker_id").get<std::string>(), std::move(r)};
}

}  // namespace tta
