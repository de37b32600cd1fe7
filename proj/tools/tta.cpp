#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tta/cli/commands.hpp"

namespace {

using namespace tta;
using namespace tta::cli;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Test-time adaptation toolkit for CTC speech recognizers"};
  app.require_subcommand(1);
  int code = kExitOk;

  // ingest
  IngestOptions ingest;
  std::string ingest_split = "test";
  std::optional<double> max_duration;
  auto* ing = app.add_subcommand("ingest", "Validate a corpus and write a JSON-lines manifest");
  ing->add_option("source", ingest.source, "Directory of WAV + .txt files, or an existing manifest")->required();
  ing->add_option("-o,--output", ingest.output, "Manifest to write")->required();
  ing->add_option("--split", ingest_split, "train, validation or test");
  ing->add_option("--max-duration", max_duration, "Keep utterances strictly shorter than this many seconds");

  // adapt
  AdaptOptions adapt;
  std::optional<std::string> config_file, manifest, checkpoint, setting, methods, groups, mode, optimizer;
  std::optional<int> steps, neg_k;
  std::optional<double> alpha, lambda, temperature, rho, lr;
  std::optional<std::uint64_t> seed;
  bool exclude_blank = false;
  auto* ad = app.add_subcommand("adapt", "Run unadapted and adapted decoding over a test manifest");
  ad->add_option("--config", config_file, "JSON run configuration; flags override it");
  ad->add_option("--manifest", manifest, "Test manifest (JSON lines)");
  ad->add_option("--checkpoint", checkpoint, "Reference model checkpoint");
  ad->add_option("-o,--output", adapt.output_dir, "Run directory")->required();
  ad->add_option("--setting", setting, "Model setting label used in tables");
  ad->add_option("--method", methods, "Comma list of none, suta, sgem (default none,suta)");
  ad->add_option("--steps", steps, "Adaptation steps per utterance");
  ad->add_option("--alpha", alpha, "SUTA entropy weight");
  ad->add_option("--lambda", lambda, "SGEM negative-sampling weight");
  ad->add_option("--temperature", temperature, "Softmax temperature");
  ad->add_option("--rho", rho, "Renyi order for SGEM");
  ad->add_option("--neg-k", neg_k, "Top-k classes excluded from negative sampling");
  ad->add_option("--mode", mode, "episodic or continual");
  ad->add_option("--lr", lr, "Learning rate");
  ad->add_option("--optimizer", optimizer, "adam or sgd");
  ad->add_option("--groups", groups, "Comma list of adapted parameter groups");
  ad->add_option("--seed", seed, "Run seed");
  ad->add_flag("--exclude-blank-frames", exclude_blank, "Drop frames whose argmax is blank from the loss");
  ad->add_option("--workers", adapt.workers, "Speaker-level worker threads");

  // evaluate
  EvaluateOptions evaluate;
  std::optional<std::string> eval_out;
  auto* ev = app.add_subcommand("evaluate", "Score a run directory per speaker");
  ev->add_option("run", evaluate.run_dir, "Run directory")->required();
  ev->add_option("-o,--output", eval_out, "Output directory (default <run>/evaluation)");

  // analyze
  AnalyzeOptions analyze;
  std::string projection = "pca";
  std::optional<std::string> projection_output;
  bool no_ems = false, no_wd = false, no_dist = false;
  auto* an = app.add_subcommand("analyze", "Per-speaker acoustic features, distances and projection");
  an->add_option("manifest", analyze.manifest, "Manifest (JSON lines)")->required();
  an->add_option("-o,--output", analyze.output_dir, "Output directory")->required();
  an->add_flag("--no-ems", no_ems, "Skip non-speech energy");
  an->add_flag("--no-word-duration", no_wd, "Skip word duration");
  an->add_flag("--no-distances", no_dist, "Skip MFCC distances and projection");
  an->add_option("--projection", projection, "pca or external");
  an->add_option("--projection-output", projection_output, "2-D output from an external embedding tool");
  an->add_flag("--dump-features", analyze.dump_features, "Also write frame-level MFCCs");

  // report
  ReportOptions report;
  std::optional<std::string> correlations, features, rank_setting, p_method;
  auto* rp = app.add_subcommand("report", "Delta table, speaker gains and correlations from run directories");
  rp->add_option("runs", report.runs, "Run directories")->required();
  rp->add_option("-o,--output", report.output_dir, "Output directory")->required();
  rp->add_option("--correlations", correlations, "Comma list of feature columns, e.g. ems,word_duration");
  rp->add_option("--features", features, "speaker_features.csv written by analyze");
  rp->add_option("--rank-setting", rank_setting, "Setting whose baseline WER orders speakers");
  rp->add_option("--p-method", p_method, "t or permutation");
  rp->add_option("--alpha", report.alpha, "Family-wise significance level");

  // synth
  SynthOptions synth;
  bool no_cache = false;
  auto* sy = app.add_subcommand("synth", "Generate the synthetic desk corpus and its trained model");
  sy->add_option("-o,--output", synth.output_dir, "Output directory")->required();
  sy->add_option("--seed", synth.setup.seed, "Corpus seed");
  sy->add_option("--speakers", synth.setup.speakers, "Number of speakers");
  sy->add_option("--utterances", synth.setup.utterances_per_speaker, "Utterances per speaker");
  sy->add_option("--train-utterances", synth.setup.train_utterances, "Training utterances");
  sy->add_option("--epochs", synth.setup.trainer.epochs, "Training epochs");
  sy->add_flag("--no-cache", no_cache, "Ignore the model cache");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (ing->parsed()) {
      ingest.split = parse_split(ingest_split);
      ingest.max_duration_s = max_duration;
      code = cmd_ingest(ingest);
    } else if (ad->parsed()) {
      if (config_file) adapt.config_file = *config_file;
      if (manifest) adapt.manifest = *manifest;
      if (checkpoint) adapt.checkpoint = *checkpoint;
      adapt.setting = setting;
      if (methods)
        for (const auto& m : split_list(*methods)) adapt.methods.push_back(parse_method(m));
      auto& o = adapt.overrides;
      if (steps) o["steps_n"] = *steps;
      if (alpha) o["alpha"] = *alpha;
      if (lambda) o["lambda"] = *lambda;
      if (temperature) o["temperature"] = *temperature;
      if (rho) o["rho"] = *rho;
      if (neg_k) o["neg_k"] = *neg_k;
      if (mode) o["mode"] = *mode;
      if (lr) o["learning_rate"] = *lr;
      if (optimizer) o["optimizer"] = *optimizer;
      if (groups) o["adapted_groups"] = split_list(*groups);
      if (seed) o["seed"] = *seed;
      if (exclude_blank) o["exclude_blank_frames"] = true;
      code = cmd_adapt(adapt);
    } else if (ev->parsed()) {
      if (eval_out) evaluate.output_dir = *eval_out;
      code = cmd_evaluate(evaluate);
    } else if (an->parsed()) {
      analyze.ems = !no_ems;
      analyze.word_duration = !no_wd;
      analyze.distances = !no_dist;
      if (projection == "pca") analyze.projection = ProjectionMethod::pca;
      else if (projection == "external") analyze.projection = ProjectionMethod::external;
      else throw Error(ErrorKind::InvalidConfig, "unknown projection '" + projection + "'");
      if (projection_output) analyze.external_projection = *projection_output;
      code = cmd_analyze(analyze);
    } else if (rp->parsed()) {
      if (correlations) report.correlations = split_list(*correlations);
      if (features) report.features = *features;
      report.rank_setting = rank_setting;
      if (p_method) {
        if (*p_method == "permutation") report.spearman.p_method = CorrelationPValue::permutation;
        else if (*p_method != "t") throw Error(ErrorKind::InvalidConfig, "unknown p-method '" + *p_method + "'");
      }
      code = cmd_report(report);
    } else if (sy->parsed()) {
      synth.use_cache = !no_cache;
      code = cmd_synth(synth);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return code;
}
