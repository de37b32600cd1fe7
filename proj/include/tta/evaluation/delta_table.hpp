#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tta/error.hpp"
#include "tta/evaluation/aggregate.hpp"
#include "tta/evaluation/wilcoxon.hpp"
#include "tta/util/format.hpp"

namespace tta {

/// Per-speaker reports of one adaptation method under one model setting.
/// The reports' baseline_wer comes from that setting's unadapted run.
struct MethodRun {
  std::string setting;
  std::string method;
  std::vector<SpeakerReport> reports;
};

struct DeltaRow {
  std::string setting;
  std::string method;
  double mean_wer = 0.0;
  std::optional<double> delta;    // empty on the unadapted row
  std::optional<double> p_value;  // empty on the unadapted row or when untestable
  std::string note;
};

inline constexpr double kSignificanceLevel = 0.05;

namespace detail {

inline std::set<std::string> speaker_set(const std::vector<SpeakerReport>& reports) {
  std::set<std::string> ids;
  for (const auto& r : reports) ids.insert(r.speaker_id);
  return ids;
}

inline std::map<std::string, const SpeakerReport*> by_speaker(const std::vector<SpeakerReport>& reports) {
  std::map<std::string, const SpeakerReport*> m;
  for (const auto& r : reports) m[r.speaker_id] = &r;
  return m;
}

}  // namespace detail

/// One unadapted row per setting followed by one row per method, in input
/// order of first appearance. Deltas are relative to the setting's unadapted
/// mean; p-values come from a paired test over speakers.
inline std::vector<DeltaRow> build_delta_table(const std::vector<MethodRun>& runs,
                                               const std::string& unadapted_label = "Unadapted") {
  if (runs.empty()) return {};
  const auto reference = detail::speaker_set(runs.front().reports);
  for (const auto& run : runs) {
    if (detail::speaker_set(run.reports) != reference)
      throw Error(ErrorKind::SpeakerSetMismatch,
                  "setting '" + run.setting + "' method '" + run.method + "' covers a different speaker set");
  }

  std::vector<std::string> settings;
  for (const auto& run : runs)
    if (std::find(settings.begin(), settings.end(), run.setting) == settings.end()) settings.push_back(run.setting);

  std::vector<DeltaRow> rows;
  for (const auto& setting : settings) {
    std::optional<double> base_mean;
    std::map<std::string, double> baseline_by_speaker;
    for (const auto& run : runs) {
      if (run.setting != setting) continue;
      double mean = mean_baseline_wer(run.reports);
      if (!base_mean) {
        base_mean = mean;
        for (const auto& r : run.reports) baseline_by_speaker[r.speaker_id] = r.baseline_wer;
        rows.push_back(DeltaRow{setting, unadapted_label, mean, std::nullopt, std::nullopt, ""});
      } else {
        for (const auto& r : run.reports) {
          if (baseline_by_speaker.at(r.speaker_id) != r.baseline_wer)
            throw Error(ErrorKind::SpeakerSetMismatch, "setting '" + setting + "' has inconsistent baselines");
        }
      }
    }
    for (const auto& run : runs) {
      if (run.setting != setting) continue;
      DeltaRow row{setting, run.method, mean_adapted_wer(run.reports), std::nullopt, std::nullopt, ""};
      row.delta = row.mean_wer - *base_mean;
      std::vector<double> base;
      std::vector<double> adapted;
      for (const auto& [id, r] : detail::by_speaker(run.reports)) {
        base.push_back(r->baseline_wer);
        adapted.push_back(r->adapted_wer);
      }
      try {
        row.p_value = wilcoxon_signed_rank(base, adapted).p_value;
      } catch (const Error& e) {
        row.note = std::string(to_string(e.kind()));
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

inline std::string format_percent(double fraction) { return strprintf("%.1f", 100.0 * fraction); }

inline std::string format_signed_percent(double fraction) {
  double pct = 100.0 * fraction;
  if (std::abs(pct) < 0.05) pct = 0.0;  // avoid "-0.0"
  return strprintf("%+.1f", pct);
}

inline std::string format_p(double p) { return p < 0.001 ? std::string("<.001") : strprintf("%.3f", p); }

inline std::string delta_table_csv(const std::vector<DeltaRow>& rows) {
  std::string out = "setting,method,wer_pct,delta_pct,p_value,significant,note\n";
  for (const auto& r : rows) {
    out += csv_row({r.setting, r.method, format_percent(r.mean_wer), r.delta ? format_signed_percent(*r.delta) : "",
                    r.p_value ? strprintf("%.6g", *r.p_value) : "",
                    r.p_value ? (*r.p_value < kSignificanceLevel ? "true" : "false") : "", r.note});
  }
  return out;
}

inline std::string delta_table_text(const std::vector<DeltaRow>& rows) {
  std::vector<std::vector<std::string>> cells = {{"Model Setting", "TTA Method", "WER", "Delta", "Stat. Sig."}};
  for (const auto& r : rows) {
    cells.push_back({r.setting, r.method, format_percent(r.mean_wer) + "%",
                     r.delta ? format_signed_percent(*r.delta) + "%" : "--",
                     r.p_value ? "p " + std::string(*r.p_value < 0.001 ? "< .001" : "= " + format_p(*r.p_value))
                               : (r.note.empty() ? "--" : r.note)});
  }
  std::vector<std::size_t> width(cells.front().size(), 0);
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (std::size_t c = 0; c < cells[i].size(); ++c) {
      out += cells[i][c];
      if (c + 1 < cells[i].size()) out += std::string(width[c] - cells[i][c].size() + 2, ' ');
    }
    out += '\n';
    if (i == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w + 2;
      out += std::string(total - 2, '-') + '\n';
    }
  }
  return out;
}

/// Speakers ordered by ascending baseline WER of `rank_setting` (ties by id);
/// rank 1 is the most accurately recognized speaker.
inline std::map<std::string, int> baseline_ranking(const std::vector<MethodRun>& runs, const std::string& rank_setting) {
  const MethodRun* source = nullptr;
  for (const auto& run : runs)
    if (run.setting == rank_setting) {
      source = &run;
      break;
    }
  if (!source) throw Error(ErrorKind::SpeakerSetMismatch, "no run for ranking setting '" + rank_setting + "'");
  auto sorted = source->reports;
  std::sort(sorted.begin(), sorted.end(), [](const SpeakerReport& a, const SpeakerReport& b) {
    return a.baseline_wer != b.baseline_wer ? a.baseline_wer < b.baseline_wer : a.speaker_id < b.speaker_id;
  });
  std::map<std::string, int> rank;
  for (std::size_t i = 0; i < sorted.size(); ++i) rank[sorted[i].speaker_id] = static_cast<int>(i) + 1;
  return rank;
}

/// Heatmap data: one line per (speaker, setting, method), gain = baseline - adapted.
inline std::string speaker_gains_csv(const std::vector<MethodRun>& runs, const std::string& rank_setting) {
  const auto rank = baseline_ranking(runs, rank_setting);
  struct Line {
    int rank;
    std::size_t run_index;
    const SpeakerReport* report;
  };
  std::vector<Line> lines;
  for (std::size_t k = 0; k < runs.size(); ++k)
    for (const auto& r : runs[k].reports) lines.push_back({rank.at(r.speaker_id), k, &r});
  std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) {
    return a.run_index != b.run_index ? a.run_index < b.run_index : a.rank < b.rank;
  });
  std::string out = "speaker_rank,speaker_id,setting,method,baseline_wer,adapted_wer,delta,gain\n";
  for (const auto& l : lines) {
    const auto& r = *l.report;
    out += csv_row({std::to_string(l.rank), r.speaker_id, runs[l.run_index].setting, runs[l.run_index].method,
                    format_double(r.baseline_wer), format_double(r.adapted_wer), format_double(r.delta),
                    format_double(-r.delta)});
  }
  return out;
}

}  // namespace tta
