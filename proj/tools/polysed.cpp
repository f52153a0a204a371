// polysed: polyphonic sound event detection pipeline.
//
//   polysed synth   --out DIR            synthetic WAVs + annotations + folds
//   polysed extract --out DIR            log-mel feature files
//   polysed augment --out DIR            augmented feature files
//   polysed train   --out DIR            cross-validated BLSTM models
//   polysed detect  --model M --features D
//   polysed eval    --predictions P --features D

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "polysed/commands.hpp"
#include "polysed/csv.hpp"
#include "polysed/log.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Polyphonic sound event detection with bidirectional LSTMs"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<std::size_t> restarts;
  std::optional<std::string> augment;
  std::optional<double> threshold;
  std::optional<std::string> out_dir;
  std::string folds_list;
  app.add_option("--config", config_path, "Run configuration (key = value)")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Base random seed");
  app.add_option("--jobs", jobs, "Worker thread cap")->check(CLI::PositiveNumber);
  app.add_option("--folds", folds_list, "Comma-separated fold ids to run (train)");
  app.add_option("--restarts", restarts, "Random restarts per fold")->check(CLI::PositiveNumber);
  app.add_option("--augment", augment, "Data augmentation on|off")->check(CLI::IsMember({"on", "off"}));
  app.add_option("--threshold", threshold, "Detection threshold in (0, 1)");
  app.add_option("--out", out_dir, "Output root directory");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  auto* extract = app.add_subcommand("extract", "Extract log-mel features");
  auto* augment_cmd = app.add_subcommand("augment", "Write augmented features");
  auto* train = app.add_subcommand("train", "Cross-validated training");
  auto* detect = app.add_subcommand("detect", "Detect events with a trained model");
  auto* eval = app.add_subcommand("eval", "Score detections against annotations");

  std::string model_path, detect_features, predictions, eval_features;
  detect->add_option("--model", model_path, "Model file (default: models/fold0.model under --out)");
  detect->add_option("--features", detect_features, "Directory of feature files");
  eval->add_option("--predictions", predictions, "Detection CSV");
  eval->add_option("--features", eval_features, "Feature files of the evaluated recordings");

  CLI11_PARSE(app, argc, argv);

  try {
    polysed::RunConfig cfg = config_path.empty() ? polysed::RunConfig{} : polysed::RunConfig::load(config_path);
    if (seed) cfg.set("rng_seed", std::to_string(*seed));
    if (jobs) cfg.train.jobs = *jobs;
    if (restarts) cfg.train.n_restarts = *restarts;
    if (augment) cfg.set("augment", *augment);
    if (threshold) cfg.train.threshold = *threshold;
    if (out_dir) cfg.out_dir = *out_dir;
    cfg = cfg.resolved();
    cfg.validate();

    std::vector<int> folds;
    if (!folds_list.empty()) {
      for (const auto& f : polysed::csv::split_line(folds_list)) {
        folds.push_back(static_cast<int>(polysed::csv::parse_int(f, "--folds")));
      }
    }

    if (synth->parsed()) {
      polysed::cmd_synth(cfg);
    } else if (extract->parsed()) {
      const auto summary = polysed::cmd_extract(cfg);
      if (summary.failed > 0) {
        polysed::logger()->error("{} of {} recordings failed", summary.failed, summary.failed + summary.written);
        return 1;
      }
    } else if (augment_cmd->parsed()) {
      polysed::cmd_augment(cfg);
    } else if (train->parsed()) {
      const auto result = polysed::cmd_train(cfg, folds);
      std::cout << polysed::format_report_table(result.overall);
    } else if (detect->parsed()) {
      polysed::cmd_detect(cfg, model_path.empty() ? cfg.model : std::filesystem::path(model_path),
                          detect_features.empty() ? cfg.features_dir : std::filesystem::path(detect_features));
    } else if (eval->parsed()) {
      const auto report = polysed::cmd_eval(cfg, predictions.empty() ? cfg.detections : std::filesystem::path(predictions),
                                            eval_features.empty() ? cfg.features_dir : std::filesystem::path(eval_features));
      std::cout << polysed::format_report_table(report);
    }
  } catch (const std::exception& e) {
    polysed::logger()->error("{}", e.what());
    return 1;
  }
  return 0;
}
