#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "polysed/types.hpp"

namespace polysed {

struct Tallies {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;

  /// 2TP / (2TP + FP + FN); 1 when all counts are zero.
  [[nodiscard]] double f1() const;
  Tallies& operator+=(const Tallies& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
};

/// How the framewise score of a context is aggregated.
enum class FramewiseMode {
  per_frame_mean,  // F1 per frame, averaged over frames (default)
  pooled_counts,   // single F1 from summed TP/FP/FN
};

/// Mean over frames of the per-frame F1; frames empty in both rolls score 1.
double framewise_f1(const TargetRoll& pred, const TargetRoll& truth);
/// F1 from TP/FP/FN pooled over all frames and classes.
double framewise_micro_f1(const TargetRoll& pred, const TargetRoll& truth);
Tallies frame_tallies(const TargetRoll& pred, const TargetRoll& truth);

/// Frames per block: round(block_s / frame_hop_s), at least one.
Eigen::Index frames_per_block(double frame_hop_s, double block_s);
/// Block-level counts with OR-pooled activity; the trailing partial block is kept.
Tallies block_tallies(const TargetRoll& pred, const TargetRoll& truth, double frame_hop_s, double block_s = 1.0);
/// Micro-averaged F1 over blocks x classes.
double block_f1(const TargetRoll& pred, const TargetRoll& truth, double frame_hop_s, double block_s = 1.0);

struct RecordingOutcome {
  TargetRoll pred;
  TargetRoll truth;
  std::string context_id;
  std::string recording_id;
  double frame_hop_s = 0.025;
};

struct ContextScores {
  std::string context_id;
  double f1_avgframe = 0.0;
  double f1_1sec = 0.0;
  Tallies frame;
  Tallies block;
  std::int64_t n_frames = 0;
  std::size_t n_recordings = 0;
};

struct EvalReport {
  std::vector<ContextScores> contexts;
  double f1_avgframe = 0.0;
  double f1_1sec = 0.0;
};

struct EvalOptions {
  double block_s = 1.0;
  FramewiseMode framewise = FramewiseMode::per_frame_mean;
};

/// Scores per context (recordings pooled; blocks never span recordings) and
/// the unweighted mean over contexts. Contexts keep first-appearance order.
EvalReport evaluate_contexts(std::span<const RecordingOutcome> outcomes, const EvalOptions& options = {});

/// Per-context and overall scores averaged over several reports (e.g. folds).
EvalReport average_reports(std::span<const EvalReport> reports);

/// `context,f1_avgframe,f1_1sec` with a final `average` row.
void write_report_csv(const std::filesystem::path& path, const EvalReport& report);
/// Fixed-width table, one row per context plus `average`, scores in percent.
std::string format_report_table(const EvalReport& report);

}  // namespace polysed
