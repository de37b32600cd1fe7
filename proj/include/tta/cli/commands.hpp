#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "tta/analysis/correlation.hpp"
#include "tta/analysis/gaussian.hpp"
#include "tta/analysis/projection.hpp"
#include "tta/cli/run_dir.hpp"
#include "tta/corpus/features.hpp"
#include "tta/corpus/manifest.hpp"
#include "tta/corpus/vad.hpp"
#include "tta/corpus/wav.hpp"
#include "tta/corpus/word_duration.hpp"
#include "tta/engine/adaptation.hpp"
#include "tta/evaluation/delta_table.hpp"
#include "tta/evaluation/wilcoxon.hpp"
#include "tta/model/reference_model.hpp"
#include "tta/synthetic/desk_experiment.hpp"
#include "tta/util/format.hpp"
#include "tta/util/hash.hpp"

namespace tta::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;
inline constexpr int kExitPartial = 4;

inline constexpr const char* kCacheEnvVar = "TTA_CACHE_DIR";

/// Errors raised while checking inputs, before any compute starts.
struct ValidationError : Error {
  using Error::Error;
  explicit ValidationError(const Error& e) : Error(e.kind(), e.what()) {}
};

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

template <typename F>
auto validating(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ValidationError&) {
    throw;
  } catch (const Error& e) {
    throw ValidationError(e);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(ErrorKind::InvalidConfig, e.what());
  }
}

// ---------------------------------------------------------------- ingest

struct IngestOptions {
  fs::path source;  // directory of WAV + .txt transcripts, or a manifest
  fs::path output;
  Split split = Split::test;
  std::optional<double> max_duration_s;
};

struct DurationStats {
  std::size_t count = 0;
  double mean_s = 0.0;
  double sd_s = 0.0;
};

inline DurationStats duration_stats(const CorpusManifest& m) {
  DurationStats s;
  s.count = m.utterances.size();
  if (s.count == 0) return s;
  for (const auto& u : m.utterances) s.mean_s += u.duration_s;
  s.mean_s /= static_cast<double>(s.count);
  if (s.count > 1) {
    double acc = 0.0;
    for (const auto& u : m.utterances) acc += (u.duration_s - s.mean_s) * (u.duration_s - s.mean_s);
    s.sd_s = std::sqrt(acc / static_cast<double>(s.count - 1));
  }
  return s;
}

/// Speaker of a WAV found under `root`: its directory below the root, or the
/// file-name prefix before the first '-' or '_' for files at the top level.
inline std::string speaker_from_path(const fs::path& root, const fs::path& wav) {
  const fs::path rel = fs::relative(wav, root);
  if (rel.has_parent_path() && rel.parent_path() != ".") return rel.parent_path().generic_string();
  const std::string stem = wav.stem().string();
  const auto cut = stem.find_first_of("-_");
  return cut == std::string::npos || cut == 0 ? stem : stem.substr(0, cut);
}

inline CorpusManifest scan_source_dir(const fs::path& root, const fs::path& manifest_dir, Split split) {
  std::vector<fs::path> wavs;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".wav") wavs.push_back(e.path());
  }
  std::sort(wavs.begin(), wavs.end());
  CorpusManifest m;
  m.split = split;
  m.base_dir = manifest_dir;
  std::set<std::string> seen;
  for (const auto& wav : wavs) {
    fs::path txt = wav;
    txt.replace_extension(".txt");
    if (!fs::exists(txt)) throw Error(ErrorKind::UnreadableFile, "missing transcript " + txt.string());
    std::string transcript = read_text_file(txt);
    while (!transcript.empty() && (transcript.back() == '\n' || transcript.back() == '\r')) transcript.pop_back();
    const WavInfo info = probe_wav(wav);
    Utterance u;
    u.utterance_id = wav.stem().string();
    if (!seen.insert(u.utterance_id).second) throw Error(ErrorKind::DuplicateId, "utterance_id '" + u.utterance_id + "' repeated");
    u.speaker_id = speaker_from_path(root, wav);
    u.audio_path = fs::relative(fs::absolute(wav), fs::absolute(manifest_dir)).generic_string();
    u.transcript = transcript;
    u.duration_s = info.duration_s();
    m.utterances.push_back(std::move(u));
  }
  return m;
}

inline int cmd_ingest(const IngestOptions& opt, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    const fs::path manifest_dir = opt.output.has_parent_path() ? opt.output.parent_path() : fs::path(".");
    CorpusManifest m = validating([&] {
      if (!fs::exists(opt.source)) throw Error(ErrorKind::UnreadableFile, "no such source " + opt.source.string());
      if (fs::is_directory(opt.source)) return scan_source_dir(opt.source, manifest_dir, opt.split);
      CorpusManifest loaded = load_manifest(opt.source, opt.split);
      for (auto& u : loaded.utterances) {
        probe_wav(loaded.resolve_audio(u));
        u.audio_path = fs::relative(fs::absolute(loaded.resolve_audio(u)), fs::absolute(manifest_dir)).generic_string();
      }
      loaded.base_dir = manifest_dir;
      return loaded;
    });
    if (opt.max_duration_s) {
      const auto before = m.utterances.size();
      m = validating([&] { return filter_max_duration(m, *opt.max_duration_s); });
      out << "dropped " << before - m.utterances.size() << " utterances of " << *opt.max_duration_s << " s or longer\n";
    }
    fs::create_directories(manifest_dir);
    save_manifest(m, opt.output);
    const auto s = duration_stats(m);
    out << strprintf("%s: %zu utterances, %zu speakers, duration mean %.2f s, SD %.2f s\n", to_string(opt.split), s.count,
                     group_by_speaker(m).size(), s.mean_s, s.sd_s);
    return kExitOk;
  });
}

// ---------------------------------------------------------------- adapt

struct AdaptOptions {
  std::optional<fs::path> config_file;  // JSON; flags below override it
  std::optional<fs::path> manifest;
  std::optional<fs::path> checkpoint;
  fs::path output_dir;
  std::optional<std::string> setting;
  std::vector<Method> methods;  // empty: taken from the config file, else {none, suta}
  nlohmann::json overrides = nlohmann::json::object();  // AdaptationConfig fields
  int workers = 1;
};

struct ResolvedRun {
  fs::path manifest;
  fs::path checkpoint;
  std::string setting;
  std::vector<AdaptationConfig> methods;
};

inline ResolvedRun resolve_adapt(const AdaptOptions& opt) {
  nlohmann::json file = nlohmann::json::object();
  fs::path file_dir = ".";
  if (opt.config_file) {
    file = read_json_file(*opt.config_file);
    file_dir = opt.config_file->parent_path();
  }
  auto path_field = [&](const std::optional<fs::path>& flag, const char* key) -> fs::path {
    if (flag) return *flag;
    if (!file.contains(key)) throw Error(ErrorKind::MissingField, std::string("no ") + key + " given");
    fs::path p = file.at(key).get<std::string>();
    return p.is_absolute() ? p : file_dir / p;
  };
  ResolvedRun r;
  r.manifest = path_field(opt.manifest, "manifest");
  r.checkpoint = path_field(opt.checkpoint, "checkpoint");
  r.setting = opt.setting ? *opt.setting : file.value("setting", r.checkpoint.stem().string());

  AdaptationConfig base = adaptation_config_from_json(file.value("adaptation", nlohmann::json::object()));
  base = adaptation_config_from_json(opt.overrides, base);
  std::vector<Method> methods = opt.methods;
  if (methods.empty() && file.contains("methods"))
    for (const auto& m : file.at("methods")) methods.push_back(parse_method(m.get<std::string>()));
  if (methods.empty()) methods = {Method::none, Method::suta};
  std::set<Method> unique;
  for (Method m : methods) {
    if (!unique.insert(m).second) throw Error(ErrorKind::InvalidConfig, std::string("method listed twice: ") + to_string(m));
    AdaptationConfig c = base;
    c.method = m;
    c.validate();
    r.methods.push_back(c);
  }
  if (!fs::exists(r.manifest)) throw Error(ErrorKind::UnreadableFile, "manifest not found: " + r.manifest.string());
  if (!fs::exists(r.checkpoint)) throw Error(ErrorKind::UnreadableFile, "checkpoint not found: " + r.checkpoint.string());
  return r;
}

inline std::string speaker_file_stem(std::size_t index) { return strprintf("%04zu", index); }

inline int cmd_adapt(const AdaptOptions& opt, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return guarded(err, [&]() -> int {
    const ResolvedRun run = validating([&] { return resolve_adapt(opt); });
    const CorpusManifest manifest = validating([&] { return load_manifest(run.manifest, Split::test); });
    const ReferenceModel model = validating([&] { return ReferenceModel::load_checkpoint(run.checkpoint); });
    validating([&] {
      for (const auto& c : run.methods)
        if (c.method != Method::none) {
          auto probe = model.clone();
          select_adaptable(*probe, c.adapted_groups);
        }
      return 0;
    });
    if (opt.workers < 1) throw ValidationError(ErrorKind::InvalidConfig, "--workers must be >= 1");

    nlohmann::json config{{"setting", run.setting},
                          {"manifest", run.manifest.generic_string()},
                          {"manifest_sha256", sha256_file(run.manifest)},
                          {"checkpoint", run.checkpoint.generic_string()},
                          {"checkpoint_fingerprint", model.fingerprint()},
                          {"methods", nlohmann::json::array()}};
    for (const auto& c : run.methods) config["methods"].push_back(to_json(c));
    const std::string config_text = config.dump(2) + "\n";

    const fs::path config_path = opt.output_dir / kConfigFile;
    if (fs::exists(config_path) && read_text_file(config_path) != config_text)
      throw ValidationError(ErrorKind::InvalidConfig,
                            "run directory " + opt.output_dir.string() + " holds a different configuration");
    write_text_file(config_path, config_text);

    const auto groups = group_by_speaker(manifest);
    std::map<std::string, std::size_t> speaker_index;
    for (std::size_t i = 0; i < groups.size(); ++i) speaker_index[groups[i].speaker_id] = i;

    bool flagged = false;
    std::vector<fs::path> artifacts{config_path};
    for (const auto& cfg : run.methods) {
      const fs::path method_dir = opt.output_dir / to_string(cfg.method);
      const fs::path speaker_dir = method_dir / "speakers";
      fs::create_directories(speaker_dir);
      auto done_marker = [&](const std::string& speaker) {
        return speaker_dir / (speaker_file_stem(speaker_index.at(speaker)) + ".done");
      };
      ExperimentOptions eo;
      eo.workers = opt.workers;
      eo.skip_speaker = [&](const std::string& speaker) { return fs::exists(done_marker(speaker)); };
      std::size_t resumed = 0;
      for (const auto& g : groups) resumed += eo.skip_speaker(g.speaker_id) ? 1 : 0;
      eo.on_speaker_done = [&](std::size_t, const SpeakerRunResult& r) {
        const std::string stem = speaker_file_stem(speaker_index.at(r.speaker_id));
        std::string results;
        std::string timings;
        for (const auto& u : r.utterances) {
          results += utterance_record(r.speaker_id, u).dump() + "\n";
          timings += nlohmann::json{{"utterance_id", u.utterance_id}, {"wall_time_s", u.trace.wall_time_s}}.dump() + "\n";
        }
        write_text_file(speaker_dir / (stem + ".jsonl"), results);
        write_text_file(speaker_dir / (stem + ".timings.jsonl"), timings);
        write_text_file(done_marker(r.speaker_id), "");
      };
      const auto t0 = std::chrono::steady_clock::now();
      run_experiment(manifest, model, cfg, eo);
      const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

      std::string results;
      std::string timings;
      for (std::size_t i = 0; i < groups.size(); ++i) {
        const std::string stem = speaker_file_stem(i);
        results += read_text_file(speaker_dir / (stem + ".jsonl"));
        timings += read_text_file(speaker_dir / (stem + ".timings.jsonl"));
      }
      write_text_file(method_dir / kResultsFile, results);
      write_text_file(method_dir / kTimingsFile, timings);
      artifacts.push_back(method_dir / kResultsFile);
      for (const auto& s : read_results(method_dir / kResultsFile)) flagged = flagged || s.has_flagged();
      out << strprintf("%s: %zu speakers (%zu resumed) in %.1f s\n", to_string(cfg.method), groups.size(), resumed, seconds);
    }

    nlohmann::json run_manifest{{"checkpoint_fingerprint", model.fingerprint()},
                                {"config_sha256", sha256_file(config_path)},
                                {"files", to_json(file_inventory(opt.output_dir, artifacts))}};
    write_text_file(opt.output_dir / kRunManifestFile, run_manifest.dump(2) + "\n");
    if (flagged) {
      err << "warning: some utterances were flagged; see status fields in results\n";
      return kExitPartial;
    }
    return kExitOk;
  });
}

// ---------------------------------------------------------------- evaluate

struct EvaluateOptions {
  fs::path run_dir;
  std::optional<fs::path> output_dir;  // defaults to <run_dir>/evaluation
};

inline int cmd_evaluate(const EvaluateOptions& opt, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    const RunArtifacts run = validating([&] { return load_run(opt.run_dir); });
    const fs::path dir = opt.output_dir ? *opt.output_dir : opt.run_dir / "evaluation";

    std::string csv = "method,speaker_id,S,D,I,N,wer,scored,flagged\n";
    nlohmann::json summary{{"setting", run.setting}, {"mean_wer", nlohmann::json::object()}};
    for (const auto& m : run.methods) {
      std::vector<double> wers;
      for (const auto& s : m.speakers) {
        WerCount total;
        int scored = 0;
        for (const auto& u : s.utterances)
          if (u.scored()) {
            total += u.counts;
            ++scored;
          }
        const int flagged = static_cast<int>(s.utterances.size()) - scored;
        const bool has_words = total.reference_words > 0;
        if (has_words) wers.push_back(total.rate());
        csv += csv_row({to_string(m.method), s.speaker_id, std::to_string(total.substitutions), std::to_string(total.deletions),
                        std::to_string(total.insertions), std::to_string(total.reference_words),
                        has_words ? format_double(total.rate()) : "", std::to_string(scored), std::to_string(flagged)});
      }
      summary["mean_wer"][to_string(m.method)] = wers.empty() ? nlohmann::json(nullptr) : nlohmann::json(unweighted_mean_wer(wers));
      out << strprintf("%-10s mean WER %s%%\n", method_label(m.method).c_str(),
                       wers.empty() ? "--" : format_percent(unweighted_mean_wer(wers)).c_str());
    }

    nlohmann::json reports = nlohmann::json::array();
    nlohmann::json tests = nlohmann::json::array();
    if (run.find(Method::none)) {
      for (const auto& mr : method_runs(run)) {
        std::vector<double> base;
        std::vector<double> adapted;
        for (const auto& r : mr.reports) {
          reports.push_back({{"method", mr.method},
                             {"speaker_id", r.speaker_id},
                             {"baseline_wer", r.baseline_wer},
                             {"adapted_wer", r.adapted_wer},
                             {"delta", r.delta},
                             {"utterance_count", r.utterance_count}});
          base.push_back(r.baseline_wer);
          adapted.push_back(r.adapted_wer);
        }
        nlohmann::json t{{"method", mr.method}};
        try {
          const auto res = wilcoxon_signed_rank(base, adapted);
          t.update({{"statistic", res.statistic},
                    {"w_plus", res.w_plus},
                    {"w_minus", res.w_minus},
                    {"p_value", res.p_value},
                    {"n_effective", res.n_effective},
                    {"exact", res.exact},
                    {"direction", to_string(res.direction)}});
        } catch (const Error& e) {
          t["error"] = to_string(e.kind());
        }
        tests.push_back(t);
      }
    }
    summary["speaker_reports"] = reports;
    summary["tests"] = tests;

    write_text_file(dir / "speaker_wer.csv", csv);
    std::vector<fs::path> files{opt.run_dir / kConfigFile};
    for (const auto& m : run.methods) files.push_back(opt.run_dir / to_string(m.method) / kResultsFile);
    files.push_back(dir / "speaker_wer.csv");
    summary["files"] = to_json(file_inventory(opt.run_dir, files));
    write_text_file(dir / "summary.json", summary.dump(2) + "\n");
    return kExitOk;
  });
}

// ---------------------------------------------------------------- analyze

struct AnalyzeOptions {
  fs::path manifest;
  fs::path output_dir;
  bool ems = true;
  bool word_duration = true;
  bool distances = true;
  ProjectionMethod projection = ProjectionMethod::pca;
  std::optional<fs::path> external_projection;  // 2-D output of an external tool
  bool dump_features = false;
};

inline std::string optional_cell(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

inline int cmd_analyze(const AnalyzeOptions& opt, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    const CorpusManifest manifest = validating([&] { return load_manifest(opt.manifest, Split::test); });
    if (opt.external_projection && opt.projection != ProjectionMethod::external)
      throw ValidationError(ErrorKind::InvalidConfig, "--projection-output needs --projection external");
    const auto groups = group_by_speaker(manifest);
    const VadProvider vad = default_vad_provider();

    struct SpeakerFeatures {
      std::string speaker_id;
      int utterances = 0;
      std::optional<double> ems;
      std::optional<double> word_duration;
      std::optional<double> variance;
      Eigen::MatrixXd means;
    };
    std::vector<SpeakerFeatures> speakers;
    std::vector<std::string> point_ids;
    std::vector<Eigen::RowVectorXd> points;
    std::string dump = "";
    bool dump_header = false;
    int ems_skipped = 0;
    for (const auto& g : groups) {
      SpeakerFeatures sf;
      sf.speaker_id = g.speaker_id;
      sf.utterances = static_cast<int>(g.utterances.size());
      double ems_sum = 0.0;
      int ems_n = 0;
      double wd_sum = 0.0;
      int wd_n = 0;
      std::vector<FeatureMatrix> mfccs;
      for (const auto& u : g.utterances) {
        const Waveform w = read_audio(manifest.resolve_audio(u));
        if (opt.ems) {
          const auto e = ems_energy(w, detect_nonspeech(w, vad));
          if (e.empty_region) ++ems_skipped;
          else {
            ems_sum += e.value;
            ++ems_n;
          }
        }
        if (opt.word_duration && !tokenize(u.transcript).empty()) {
          wd_sum += word_duration(u);
          ++wd_n;
        }
        if (opt.distances) {
          FeatureMatrix f = compute_mfcc(w);
          if (opt.dump_features) {
            if (!dump_header) dump += feature_csv_header(f.frames.cols());
            dump_header = true;
            dump += feature_csv_rows(u.utterance_id, f);
          }
          point_ids.push_back(u.utterance_id);
          points.push_back(f.frames.colwise().mean());
          mfccs.push_back(std::move(f));
        }
      }
      if (ems_n) sf.ems = ems_sum / ems_n;
      if (wd_n) sf.word_duration = wd_sum / wd_n;
      if (opt.distances) {
        sf.means = utterance_means(mfccs);
        if (sf.means.rows() >= 2) sf.variance = within_speaker_variance(sf.means);
      }
      speakers.push_back(std::move(sf));
    }
    if (ems_skipped) err << "note: " << ems_skipped << " utterances had no non-speech region and were left out of EMS energy\n";

    std::string csv = "speaker_id,utterances,ems_energy,word_duration,within_speaker_variance\n";
    for (const auto& s : speakers)
      csv += csv_row({s.speaker_id, std::to_string(s.utterances), optional_cell(s.ems), optional_cell(s.word_duration),
                      optional_cell(s.variance)});
    write_text_file(opt.output_dir / "speaker_features.csv", csv);

    if (opt.distances) {
      std::vector<std::optional<GaussianSummary>> gauss;
      for (const auto& s : speakers) {
        if (s.means.rows() >= 2) gauss.emplace_back(gaussian_summary(s.means));
        else gauss.emplace_back(std::nullopt);
      }
      std::string dist = "speaker_a,speaker_b,bhattacharyya\n";
      for (std::size_t i = 0; i < speakers.size(); ++i)
        for (std::size_t j = i + 1; j < speakers.size(); ++j) {
          if (!gauss[i] || !gauss[j]) continue;
          dist += csv_row({speakers[i].speaker_id, speakers[j].speaker_id, format_double(bhattacharyya_distance(*gauss[i], *gauss[j]))});
        }
      write_text_file(opt.output_dir / "bhattacharyya.csv", dist);

      Eigen::MatrixXd matrix(static_cast<Eigen::Index>(points.size()), points.empty() ? 0 : points.front().size());
      for (std::size_t i = 0; i < points.size(); ++i) matrix.row(static_cast<Eigen::Index>(i)) = points[i];
      std::vector<Point2d> projected;
      if (opt.projection == ProjectionMethod::pca) {
        projected = project_2d(point_ids, matrix);
      } else {
        write_projection_input(opt.output_dir / "projection_input.csv", point_ids, matrix);
        if (opt.external_projection) projected = read_projection_output(*opt.external_projection);
      }
      if (!projected.empty()) {
        std::map<std::string, std::string> speaker_of;
        for (const auto& u : manifest.utterances) speaker_of[u.utterance_id] = u.speaker_id;
        std::string proj = "point_id,speaker_id,x,y\n";
        for (const auto& p : projected)
          proj += csv_row({p.point_id, speaker_of.count(p.point_id) ? speaker_of.at(p.point_id) : "", format_double(p.x),
                           format_double(p.y)});
        write_text_file(opt.output_dir / "projection.csv", proj);
      }
      if (opt.dump_features) write_text_file(opt.output_dir / "mfcc.csv", dump);
    }
    out << "analyzed " << manifest.utterances.size() << " utterances from " << speakers.size() << " speakers\n";
    return kExitOk;
  });
}

// ---------------------------------------------------------------- report

struct ReportOptions {
  std::vector<fs::path> runs;
  fs::path output_dir;
  std::vector<std::string> correlations;  // columns of the features file, e.g. ems, word_duration
  std::optional<fs::path> features;       // speaker_features.csv from analyze
  std::optional<std::string> rank_setting;
  SpearmanOptions spearman;
  double alpha = 0.05;
};

inline std::map<std::string, std::map<std::string, double>> read_speaker_features(const fs::path& path) {
  const std::string text = read_text_file(path);
  std::map<std::string, std::map<std::string, double>> out;  // column -> speaker -> value
  std::vector<std::string> header;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    auto cells = csv_split(line);
    if (header.empty()) {
      header = cells;
      if (header.empty() || header[0] != "speaker_id") throw Error(ErrorKind::CorruptFile, path.string() + ": expected speaker_id column");
      continue;
    }
    for (std::size_t c = 1; c < cells.size() && c < header.size(); ++c)
      if (!cells[c].empty()) out[header[c]][cells[0]] = std::stod(cells[c]);
  }
  return out;
}

/// Maps a short feature name to its column in speaker_features.csv.
inline std::string feature_column(const std::string& name) {
  if (name == "ems") return "ems_energy";
  if (name == "variance") return "within_speaker_variance";
  return name;
}

inline int cmd_report(const ReportOptions& opt, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    std::vector<MethodRun> runs;
    std::size_t completed = 0;
    validating([&] {
      for (const auto& dir : opt.runs) {
        const RunArtifacts run = load_run(dir);
        completed += run.methods.size();
        for (auto& mr : method_runs(run)) runs.push_back(std::move(mr));
      }
      return 0;
    });
    if (completed < 2 || runs.empty())
      throw ValidationError(ErrorKind::InvalidConfig, "report needs an unadapted run and at least one adapted run");
    std::map<std::string, std::map<std::string, double>> features;
    if (!opt.correlations.empty()) {
      if (!opt.features) throw ValidationError(ErrorKind::MissingField, "--correlations needs --features");
      features = validating([&] { return read_speaker_features(*opt.features); });
      for (const auto& name : opt.correlations)
        if (!features.count(feature_column(name)))
          throw ValidationError(ErrorKind::MissingField, "features file has no values for '" + name + "'");
    }

    const auto rows = build_delta_table(runs);
    write_text_file(opt.output_dir / "delta_table.csv", delta_table_csv(rows));
    const std::string text = delta_table_text(rows);
    write_text_file(opt.output_dir / "delta_table.txt", text);
    out << text;
    write_text_file(opt.output_dir / "speaker_gains.csv",
                    speaker_gains_csv(runs, opt.rank_setting ? *opt.rank_setting : runs.front().setting));

    if (!opt.correlations.empty()) {
      struct Test {
        std::string setting;
        std::string feature;
        std::optional<CorrelationResult> r;
      };
      std::vector<Test> tests;
      for (const auto& run : runs)
        for (const auto& name : opt.correlations) {
          const auto& column = features.at(feature_column(name));
          std::map<std::string, double> feature;
          std::vector<SpeakerReport> reports;
          for (const auto& rep : run.reports) {
            auto it = column.find(rep.speaker_id);
            if (it == column.end()) continue;
            feature[rep.speaker_id] = it->second;
            reports.push_back(rep);
          }
          Test t{run.setting + "/" + run.method, name, std::nullopt};
          if (reports.size() < run.reports.size())
            err << "note: " << name << " is missing for " << run.reports.size() - reports.size() << " speakers of "
                << t.setting << "\n";
          try {
            t.r = correlate_gains(reports, feature, opt.spearman);
          } catch (const Error& e) {
            if (e.kind() != ErrorKind::ZeroVariance && e.kind() != ErrorKind::TooFewPoints) throw;
            err << "note: no correlation for " << t.setting << " " << name << ": " << e.what() << "\n";
          }
          tests.push_back(std::move(t));
        }
      std::vector<double> raw;
      for (const auto& t : tests)
        if (t.r) raw.push_back(t.r->p_value);
      const auto hb = holm_bonferroni(raw, opt.alpha);
      std::string csv = "setting,feature,r,raw_p,adjusted_p,reject\n";
      std::size_t k = 0;
      for (const auto& t : tests) {
        if (!t.r) {
          csv += csv_row({t.setting, t.feature, "", "", "", ""});
          continue;
        }
        csv += csv_row({t.setting, t.feature, format_double(t.r->r), format_double(hb.raw_p[k]),
                        format_double(hb.adjusted_p[k]), hb.reject[k] ? "true" : "false"});
        ++k;
      }
      write_text_file(opt.output_dir / "correlations.csv", csv);
    }
    return kExitOk;
  });
}

// ---------------------------------------------------------------- synth

struct SynthOptions {
  fs::path output_dir;
  DeskSetupConfig setup;
  bool use_cache = true;
};

inline nlohmann::json to_json(const DeskSetupConfig& c) {
  return nlohmann::json{{"seed", c.seed},
                        {"train_utterances", c.train_utterances},
                        {"epochs", c.trainer.epochs},
                        {"batch_size", c.trainer.batch_size},
                        {"trainer_lr", c.trainer.learning_rate},
                        {"trainer_seed", c.trainer.seed},
                        {"hidden", c.model.hidden},
                        {"feature_dim", c.model.feature_dim},
                        {"train_snr_min_db", c.train_snr_min_db},
                        {"train_snr_max_db", c.train_snr_max_db}};
}

/// Cache location for trained desk models, if the environment names one.
inline std::optional<fs::path> cache_dir() {
  const char* v = std::getenv(kCacheEnvVar);
  if (!v || !*v) return std::nullopt;
  return fs::path(v);
}

/// Writes a desk-scale corpus: 16-bit WAVs, a test manifest, the trained
/// reference checkpoint and a speakers.csv with each speaker's shift.
inline int cmd_synth(const SynthOptions& opt, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    std::optional<ReferenceModel> model;
    std::optional<fs::path> cached;
    if (opt.use_cache) {
      if (auto dir = cache_dir()) cached = *dir / ("desk-model-" + sha256_hex(to_json(opt.setup).dump()).substr(0, 16) + ".ckpt");
    }
    if (cached && fs::exists(*cached)) {
      model = ReferenceModel::load_checkpoint(*cached);
      out << "using cached model " << cached->string() << '\n';
    } else {
      double loss = 0.0;
      model = train_desk_model(opt.setup, &loss);
      out << strprintf("trained reference model, final loss %.4f\n", loss);
      if (cached) {
        fs::create_directories(cached->parent_path());
        model->save_checkpoint(*cached);
      }
    }
    const DeskSetup setup = build_desk_setup(opt.setup, &*model);
    const fs::path audio_dir = opt.output_dir / "audio";
    CorpusManifest manifest = setup.test_manifest;
    manifest.base_dir = opt.output_dir;
    for (auto& u : manifest.utterances) {
      const fs::path rel = fs::path("audio") / u.speaker_id / (u.utterance_id + ".wav");
      fs::create_directories((opt.output_dir / rel).parent_path());
      write_wav(opt.output_dir / rel, setup.test_audio.at(u.utterance_id), 16);
      u.audio_path = rel.generic_string();
      u.duration_s = setup.test_audio.at(u.utterance_id).duration_s();
    }
    fs::create_directories(opt.output_dir);
    save_manifest(manifest, opt.output_dir / "test.jsonl");
    setup.model.save_checkpoint(opt.output_dir / "model.ckpt");
    std::string speakers = "speaker_id,snr_db,gain_db,noise_level_db\n";
    for (std::size_t i = 0; i < setup.speaker_ids.size(); ++i)
      speakers += csv_row({setup.speaker_ids[i], format_double(setup.shifts[i].snr_db), format_double(setup.shifts[i].gain_db),
                           format_double(setup.shifts[i].noise_level_db())});
    write_text_file(opt.output_dir / "speakers.csv", speakers);
    out << "wrote " << manifest.utterances.size() << " utterances to " << opt.output_dir.string() << '\n';
    return kExitOk;
  });
}

}  // namespace tta::cli
