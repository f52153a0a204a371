#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "polysed/features.hpp"
#include "polysed/types.hpp"

namespace polysed {

struct EventAnnotation {
  double onset_s = 0.0;
  double offset_s = 0.0;
  std::size_t class_id = 0;
  std::string recording_id;
};

/// Where a piece of training material came from.
struct Provenance {
  std::string recording_id;
  std::string context_id;
  /// Original recordings this item was derived from (itself for originals).
  std::vector<std::string> sources;
  bool augmented = false;
};

/// Feature/target pair for one recording (original or augmented).
struct LabeledSpectrogram {
  MelSpectrogram spec;
  TargetRoll roll;
  Provenance provenance;
};

struct TrainingSequence {
  Matrix features;  // T x n_bands
  BinaryMatrix targets;  // T x L
  Provenance provenance;
  std::size_t start_frame = 0;
  std::size_t scale = 0;

  [[nodiscard]] Eigen::Index length() const { return features.rows(); }
};

struct SequenceBatch {
  std::vector<TrainingSequence> sequences;

  [[nodiscard]] std::size_t batch_size() const { return sequences.size(); }
  [[nodiscard]] Eigen::Index length() const {
    return sequences.empty() ? 0 : sequences.front().length();
  }
};

/// Frame t spans [t * hop, t * hop + len); it is active for class k when any
/// event of class k intersects that span with nonzero length.
TargetRoll annotations_to_roll(std::span<const EventAnnotation> events, std::size_t n_frames,
                               double frame_hop_s, double frame_len_s, std::size_t n_classes);

/// Non-overlapping cuts at each length starting at frame 0; tails shorter than
/// a length are dropped. Output concatenates the scales in the order given.
std::vector<TrainingSequence> split_multiscale(const LabeledSpectrogram& item,
                                               std::span<const std::size_t> lengths);

/// Groups by length, shuffles each group, chunks into batches (last one may be
/// partial) and shuffles the batch order.
std::vector<SequenceBatch> make_minibatches(std::vector<TrainingSequence> sequences,
                                            std::size_t batch_size, std::uint64_t rng_seed);

/// Ordered class names; the index is the column in every TargetRoll.
struct ClassMap {
  std::vector<std::string> names;

  [[nodiscard]] std::size_t size() const { return names.size(); }
  [[nodiscard]] std::size_t index_of(const std::string& name) const;
};

/// One annotation row with its context.
struct AnnotationRecord {
  std::string recording_id;
  std::string context_id;
  double onset_s = 0.0;
  double offset_s = 0.0;
  std::string class_name;
};

/// `recording_id,context_id,onset_s,offset_s,class_name`
std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path);
void write_annotations(const std::filesystem::path& path, std::span<const AnnotationRecord> rows);

/// `class_name,class_id`
ClassMap read_class_map(const std::filesystem::path& path);
void write_class_map(const std::filesystem::path& path, const ClassMap& classes);

/// `recording_id,fold_id`
std::map<std::string, int> read_fold_assignment(const std::filesystem::path& path);
void write_fold_assignment(const std::filesystem::path& path, const std::map<std::string, int>& folds);

/// Annotations of one recording, mapped to class indices.
std::vector<EventAnnotation> events_for_recording(std::span<const AnnotationRecord> rows,
                                                  const std::string& recording_id,
                                                  const ClassMap& classes);

}  // namespace polysed
