#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tta/engine/adaptation.hpp"
#include "tta/engine/config.hpp"
#include "tta/error.hpp"
#include "tta/evaluation/aggregate.hpp"
#include "tta/evaluation/delta_table.hpp"
#include "tta/util/hash.hpp"

namespace tta::cli {

namespace fs = std::filesystem;

inline constexpr const char* kConfigFile = "config.json";
inline constexpr const char* kRunManifestFile = "run_manifest.json";
inline constexpr const char* kResultsFile = "results.jsonl";
inline constexpr const char* kTimingsFile = "timings.jsonl";

inline std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::UnreadableFile, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::UnreadableFile, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::UnreadableFile, "write failed for " + path.string());
}

inline nlohmann::json read_json_file(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::CorruptFile, path.string() + ": " + e.what());
  }
}

/// Row label used for a method in tables.
inline std::string method_label(Method m) {
  switch (m) {
    case Method::none: return "Unadapted";
    case Method::suta: return "SUTA";
    case Method::sgem: return "SGEM";
  }
  return "Unadapted";
}

/// Per-speaker results of one method, in results-file order.
struct MethodResults {
  Method method = Method::none;
  std::vector<SpeakerRunResult> speakers;
};

struct RunArtifacts {
  fs::path dir;
  nlohmann::json config;
  std::string setting;
  std::vector<MethodResults> methods;

  const MethodResults* find(Method m) const {
    for (const auto& r : methods)
      if (r.method == m) return &r;
    return nullptr;
  }
};

inline std::vector<SpeakerRunResult> read_results(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::UnreadableFile, "cannot read " + path.string());
  std::vector<SpeakerRunResult> speakers;
  std::map<std::string, std::size_t> index;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto [speaker, r] = parse_utterance_record(nlohmann::json::parse(line));
      auto [it, inserted] = index.try_emplace(speaker, speakers.size());
      if (inserted) speakers.push_back(SpeakerRunResult{speaker, {}, ""});
      speakers[it->second].utterances.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::CorruptFile, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return speakers;
}

/// Reads config.json and every method's results.jsonl. Never touches the
/// model checkpoint.
inline RunArtifacts load_run(const fs::path& dir) {
  RunArtifacts run;
  run.dir = dir;
  run.config = read_json_file(dir / kConfigFile);
  run.setting = run.config.value("setting", dir.filename().string());
  for (const auto& m : run.config.at("methods")) {
    MethodResults r;
    r.method = parse_method(m.at("method").get<std::string>());
    const fs::path results = dir / to_string(r.method) / kResultsFile;
    if (!fs::exists(results))
      throw Error(ErrorKind::UnreadableFile, "run " + dir.string() + " has no completed results for " + to_string(r.method));
    r.speakers = read_results(results);
    run.methods.push_back(std::move(r));
  }
  return run;
}

/// Pooled WER per speaker over scored utterances; speakers with none are left out.
inline std::map<std::string, double> speaker_wers(const MethodResults& r) {
  std::map<std::string, double> out;
  for (const auto& s : r.speakers) {
    const auto counts = s.scored_counts();
    std::int64_t n = 0;
    for (const auto& c : counts) n += c.reference_words;
    if (n > 0) out[s.speaker_id] = speaker_wer(counts);
  }
  return out;
}

/// Pairs every adapted method of the run with its unadapted baseline.
inline std::vector<MethodRun> method_runs(const RunArtifacts& run) {
  const MethodResults* base = run.find(Method::none);
  if (!base) throw Error(ErrorKind::InvalidConfig, "run " + run.dir.string() + " has no unadapted (none) method");
  const auto base_wers = speaker_wers(*base);
  std::vector<MethodRun> out;
  for (const auto& m : run.methods) {
    if (m.method == Method::none) continue;
    MethodRun mr{run.setting, method_label(m.method), {}};
    const auto adapted = speaker_wers(m);
    for (const auto& s : base->speakers) {
      auto b = base_wers.find(s.speaker_id);
      auto a = adapted.find(s.speaker_id);
      if (b == base_wers.end() || a == adapted.end()) continue;
      const auto count = static_cast<int>(s.utterances.size());
      mr.reports.push_back(make_speaker_report(s.speaker_id, b->second, a->second, count));
    }
    out.push_back(std::move(mr));
  }
  return out;
}

struct FileEntry {
  std::string path;  // relative to the run directory
  std::string sha256;
};

inline std::vector<FileEntry> file_inventory(const fs::path& dir, const std::vector<fs::path>& files) {
  std::vector<FileEntry> out;
  for (const auto& f : files) out.push_back({fs::relative(f, dir).generic_string(), sha256_file(f)});
  return out;
}

inline nlohmann::json to_json(const std::vector<FileEntry>& files) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& f : files) j.push_back({{"path", f.path}, {"sha256", f.sha256}});
  return j;
}

}  // namespace tta::cli
