#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "tta/analysis/correlation.hpp"
#include "tta/engine/adaptation.hpp"
#include "tta/evaluation/aggregate.hpp"
#include "tta/model/reference_model.hpp"
#include "tta/synthetic/desk_corpus.hpp"
#include "tta/synthetic/trainer.hpp"
#include "tta/util/format.hpp"

namespace tta {

/// A model trained on clean synthetic speech plus a shifted test population.
struct DeskSetup {
  ReferenceModel model;
  double final_training_loss = 0.0;
  std::vector<std::string> speaker_ids;
  std::vector<SpeakerShift> shifts;
  CorpusManifest test_manifest;                 // audio_path holds an in-memory key
  std::map<std::string, Waveform> test_audio;   // keyed by utterance_id
  std::vector<RenderedUtterance> clean_test;    // unshifted renderings, same order as the manifest
};

struct DeskSetupConfig {
  std::uint64_t seed = 20240917;
  int train_utterances = 500;
  TrainerConfig trainer;
  DeskCorpusConfig corpus;
  ReferenceModelConfig model;
  // Training audio gets white noise at an SNR drawn uniformly from this range.
  double train_snr_min_db = 35.0;
  double train_snr_max_db = 50.0;
  int speakers = 10;
  int utterances_per_speaker = 10;
  // Speaker SNRs are spread evenly over this range (shuffled across ids);
  // gains are drawn uniformly.
  double snr_min_db = 20.0;
  double snr_max_db = 35.0;
  double gain_min_db = -3.0;
  double gain_max_db = 3.0;
};

/// Trains the reference model on clean renderings. Training data and the
/// test population draw from separate random streams, so a cached model
/// yields the same test set.
inline ReferenceModel train_desk_model(const DeskSetupConfig& cfg, double* final_loss = nullptr) {
  const Vocabulary vocab = Vocabulary::characters();
  DeskCorpusConfig corpus_cfg = cfg.corpus;
  corpus_cfg.mel_bins = cfg.model.feature_dim;
  const DeskCorpus corpus(corpus_cfg, vocab);
  std::mt19937_64 rng(cfg.seed);
  ReferenceModel model(cfg.model, vocab, cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<TrainingExample> train;
  std::uniform_real_distribution<double> train_snr(cfg.train_snr_min_db, cfg.train_snr_max_db);
  for (int i = 0; i < cfg.train_utterances; ++i) {
    const auto u = corpus.render(corpus.random_transcript(rng), rng);
    const Waveform noisy = apply_shift(u.audio, SpeakerShift{train_snr(rng), 0.0}, rng);
    train.push_back(TrainingExample{model.log_mel(noisy), frame_targets(model, u)});
  }
  const double loss = train_reference_model(model, train, cfg.trainer);
  if (final_loss) *final_loss = loss;
  return model;
}

inline DeskSetup build_desk_setup(const DeskSetupConfig& cfg, const ReferenceModel* pretrained = nullptr) {
  const Vocabulary vocab = Vocabulary::characters();
  DeskCorpusConfig corpus_cfg = cfg.corpus;
  corpus_cfg.mel_bins = cfg.model.feature_dim;
  const DeskCorpus corpus(corpus_cfg, vocab);

  double loss = 0.0;
  DeskSetup setup{pretrained ? *pretrained : train_desk_model(cfg, &loss), loss, {}, {}, {}, {}, {}};
  std::mt19937_64 rng(cfg.seed + 1);

  std::vector<double> snrs;
  for (int s = 0; s < cfg.speakers; ++s)
    snrs.push_back(cfg.speakers == 1 ? cfg.snr_max_db
                                     : cfg.snr_min_db + (cfg.snr_max_db - cfg.snr_min_db) * s / (cfg.speakers - 1));
  std::shuffle(snrs.begin(), snrs.end(), rng);
  std::uniform_real_distribution<double> gain(cfg.gain_min_db, cfg.gain_max_db);
  setup.test_manifest.split = Split::test;
  for (int s = 0; s < cfg.speakers; ++s) {
    const std::string speaker = strprintf("spk%02d", s + 1);
    const SpeakerShift shift{snrs[static_cast<std::size_t>(s)], gain(rng)};
    setup.speaker_ids.push_back(speaker);
    setup.shifts.push_back(shift);
    for (int k = 0; k < cfg.utterances_per_speaker; ++k) {
      auto u = corpus.render(corpus.random_transcript(rng), rng);
      Waveform shifted = apply_shift(u.audio, shift, rng);
      const std::string id = strprintf("%s-u%03d", speaker.c_str(), k + 1);
      setup.test_manifest.utterances.push_back(Utterance{id, speaker, id, u.transcript, shifted.duration_s()});
      setup.test_audio.emplace(id, std::move(shifted));
      setup.clean_test.push_back(std::move(u));
    }
  }
  return setup;
}

inline AudioLoader in_memory_loader(const std::map<std::string, Waveform>& audio) {
  return [&audio](const Utterance& u) { return audio.at(u.utterance_id); };
}

struct DeskExperimentResult {
  std::vector<SpeakerReport> reports;
  std::vector<double> noise_levels_db;  // per report, larger = noisier
  double baseline_mean_wer = 0.0;
  double adapted_mean_wer = 0.0;
  int adapted_utterances = 0;
  int loss_decreased = 0;
  CorrelationResult gain_vs_noise;
};

/// Baseline and adapted runs on the shifted population.
inline DeskExperimentResult run_desk_experiment(const DeskSetup& setup, const AdaptationConfig& adapted_cfg,
                                                int workers = 1) {
  AdaptationConfig baseline_cfg = adapted_cfg;
  baseline_cfg.method = Method::none;
  ExperimentOptions opts;
  opts.workers = workers;
  opts.loader = in_memory_loader(setup.test_audio);
  const auto baseline = run_experiment(setup.test_manifest, setup.model, baseline_cfg, opts);
  const auto adapted = run_experiment(setup.test_manifest, setup.model, adapted_cfg, opts);

  DeskExperimentResult out;
  std::vector<double> gains;
  for (std::size_t s = 0; s < baseline.size(); ++s) {
    const double b = speaker_wer(baseline[s].scored_counts());
    const double a = speaker_wer(adapted[s].scored_counts());
    out.reports.push_back(make_speaker_report(baseline[s].speaker_id, b, a,
                                              static_cast<int>(baseline[s].utterances.size())));
    out.noise_levels_db.push_back(setup.shifts[s].noise_level_db());
    gains.push_back(b - a);
    for (const auto& u : adapted[s].utterances) {
      if (!u.trace.initial_total || !u.trace.final_total) continue;
      ++out.adapted_utterances;
      if (*u.trace.final_total < *u.trace.initial_total) ++out.loss_decreased;
    }
  }
  out.baseline_mean_wer = mean_baseline_wer(out.reports);
  out.adapted_mean_wer = mean_adapted_wer(out.reports);
  try {
    out.gain_vs_noise = spearman(gains, out.noise_levels_db);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::ZeroVariance) throw;
    out.gain_vs_noise = CorrelationResult{0.0, 1.0, static_cast<int>(gains.size())};  // gains all equal
  }
  return out;
}

}  // namespace tta
