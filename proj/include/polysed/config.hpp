#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "polysed/evaluation.hpp"
#include "polysed/features.hpp"
#include "polysed/synthgen.hpp"
#include "polysed/training.hpp"

namespace polysed {

/// Everything a CLI run needs. Loaded from a flat `key = value` file; `#`
/// starts a comment. Lists are comma-separated.
struct RunConfig {
  TrainConfig train;
  SynthSpec synth;
  FrameSettings features;
  int n_folds = 5;
  FramewiseMode framewise = FramewiseMode::per_frame_mean;
  double block_s = 1.0;

  std::filesystem::path out_dir = "polysed_out";
  // Empty paths resolve under out_dir (see resolved()).
  std::filesystem::path audio_dir;
  std::filesystem::path features_dir;
  std::filesystem::path augmented_dir;
  std::filesystem::path annotations;
  std::filesystem::path classes;
  std::filesystem::path folds;
  std::filesystem::path models_dir;
  std::filesystem::path logs_dir;
  std::filesystem::path model;
  std::filesystem::path detections;
  std::filesystem::path report_csv;
  std::filesystem::path report_txt;

  /// Sets one field; throws InvalidInput for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  /// Copy with every empty path filled from out_dir.
  [[nodiscard]] RunConfig resolved() const;
  /// Field-range checks across the embedded configs.
  void validate() const;
  /// Training-relevant fields as `key=value` lines, in a fixed order.
  [[nodiscard]] std::string training_snapshot() const;

  static RunConfig load(const std::filesystem::path& path);
};

}  // namespace polysed
