#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "polysed/config.hpp"
#include "polysed/training.hpp"

namespace polysed {

/// Pipeline stages behind the CLI subcommands. Each takes a resolved
/// RunConfig, writes its artifacts and throws Error on failure.

/// Synthetic WAVs plus annotations, class map and fold assignment.
void cmd_synth(const RunConfig& cfg);

struct ExtractSummary {
  std::size_t written = 0;
  std::size_t failed = 0;
};
/// Feature files for every WAV in audio_dir. Per-file failures are logged
/// and counted; an empty audio_dir is an error.
ExtractSummary cmd_extract(const RunConfig& cfg);

/// Augmented feature files and their annotation CSV under augmented_dir.
void cmd_augment(const RunConfig& cfg);

/// Cross-validation over the selected folds (all when empty). Writes one
/// model per fold and one epoch log per restart.
CrossValidationResult cmd_train(const RunConfig& cfg, std::span<const int> folds = {});

/// Detection CSV for every feature file in `features_dir`.
void cmd_detect(const RunConfig& cfg, const std::filesystem::path& model_path,
                const std::filesystem::path& features_dir);

/// Scores a detection CSV against the annotations for the recordings in
/// `features_dir`; writes the report CSV and table.
EvalReport cmd_eval(const RunConfig& cfg, const std::filesystem::path& predictions,
                    const std::filesystem::path& features_dir);

/// Feature files (sorted by name) with rolls built from the annotation CSV.
std::vector<LabeledSpectrogram> load_labeled_features(const std::filesystem::path& features_dir,
                                                      const std::filesystem::path& annotations,
                                                      const ClassMap& classes);

}  // namespace polysed
