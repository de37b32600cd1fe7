#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "tta/error.hpp"

namespace tta {

struct Utterance {
  std::string utterance_id;
  std::string speaker_id;
  std::string audio_path;
  std::string transcript;
  double duration_s = 0.0;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

enum class Split { train, validation, test };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "test";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "validation" || s == "valid" || s == "dev") return Split::validation;
  if (s == "test") return Split::test;
  throw Error(ErrorKind::InvalidConfig, "unknown split '" + s + "'");
}

struct CorpusManifest {
  Split split = Split::test;
  std::vector<Utterance> utterances;
  /// Directory relative audio paths are resolved against.
  std::filesystem::path base_dir;

  std::filesystem::path resolve_audio(const Utterance& u) const {
    std::filesystem::path p(u.audio_path);
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  }
};

inline nlohmann::json to_json(const Utterance& u) {
  nlohmann::json j;
  j["utterance_id"] = u.utterance_id;
  j["speaker_id"] = u.speaker_id;
  j["audio_path"] = u.audio_path;
  j["transcript"] = u.transcript;
  j["duration_s"] = u.duration_s;
  return j;
}

/// Reads a JSON-lines manifest. Blank lines are skipped; record order is kept.
inline CorpusManifest load_manifest(const std::filesystem::path& path, Split split = Split::test) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::UnreadableFile, "cannot open manifest " + path.string());

  CorpusManifest manifest;
  manifest.split = split;
  manifest.base_dir = path.parent_path();
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::CorruptFile, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    auto field = [&](const char* name) -> const nlohmann::json& {
      if (!j.is_object() || !j.contains(name))
        throw Error(ErrorKind::MissingField,
                    "field '" + std::string(name) + "' missing at " + path.string() + ":" + std::to_string(line_no));
      return j.at(name);
    };
    Utterance u;
    try {
      u.utterance_id = field("utterance_id").get<std::string>();
      u.speaker_id = field("speaker_id").get<std::string>();
      u.audio_path = field("audio_path").get<std::string>();
      u.transcript = field("transcript").get<std::string>();
      u.duration_s = field("duration_s").get<double>();
    } catch (const nlohmann::json::type_error& e) {
      throw Error(ErrorKind::CorruptFile, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (u.speaker_id.empty())
      throw Error(ErrorKind::MissingField, "empty speaker_id at " + path.string() + ":" + std::to_string(line_no));
    if (!(u.duration_s >= 0.0))
      throw Error(ErrorKind::CorruptFile, "negative duration at " + path.string() + ":" + std::to_string(line_no));
    if (!seen.insert(u.utterance_id).second)
      throw Error(ErrorKind::DuplicateId,
                  "utterance_id '" + u.utterance_id + "' repeated at " + path.string() + ":" + std::to_string(line_no));
    manifest.utterances.push_back(std::move(u));
  }
  return manifest;
}

inline void save_manifest(const CorpusManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::UnreadableFile, "cannot write manifest " + path.string());
  for (const auto& u : manifest.utterances) out << to_json(u).dump() << '\n';
}

/// Keeps utterances strictly shorter than `max_s`, preserving order.
inline CorpusManifest filter_max_duration(const CorpusManifest& manifest, double max_s) {
  if (!(max_s > 0.0)) throw Error(ErrorKind::InvalidConfig, "max duration must be positive");
  CorpusManifest out;
  out.split = manifest.split;
  out.base_dir = manifest.base_dir;
  for (const auto& u : manifest.utterances)
    if (u.duration_s < max_s) out.utterances.push_back(u);
  return out;
}

struct SpeakerGroup {
  std::string speaker_id;
  std::vector<Utterance> utterances;
};

/// Speakers in order of first appearance; each keeps its utterances in manifest order.
inline std::vector<SpeakerGroup> group_by_speaker(const CorpusManifest& manifest) {
  std::vector<SpeakerGroup> groups;
  std::map<std::string, std::size_t> index;
  for (const auto& u : manifest.utterances) {
    auto [it, inserted] = index.try_emplace(u.speaker_id, groups.size());
    if (inserted) groups.push_back(SpeakerGroup{u.speaker_id, {}});
    groups[it->second].utterances.push_back(u);
  }
  return groups;
}

}  // namespace tta
