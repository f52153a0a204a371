#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "polysed/sequence.hpp"
#include "polysed/types.hpp"

namespace polysed {

struct DetectedEvent {
  std::size_t class_id = 0;
  double onset_s = 0.0;
  double offset_s = 0.0;
  std::string recording_id;
};

/// roll[t][k] = 1 iff y[t][k] >= threshold. Stateless per frame.
TargetRoll threshold_outputs(const Matrix& y, double threshold);

/// One event per maximal run of active frames per class:
/// onset = first frame start, offset = last frame start + frame length.
/// Sorted by onset, then class.
std::vector<DetectedEvent> roll_to_events(const TargetRoll& roll, double frame_hop_s, double frame_len_s,
                                          const std::string& recording_id = {});

/// Exact inverse of roll_to_events for frame-aligned events: frame t is
/// active when its whole span [t * hop, t * hop + len) lies inside an event.
TargetRoll events_to_roll(std::span<const DetectedEvent> events, std::size_t n_frames, double frame_hop_s,
                          double frame_len_s, std::size_t n_classes);

/// `recording_id,class_name,onset_s,offset_s`, sorted by onset within each recording.
void write_detections(const std::filesystem::path& path, std::span<const DetectedEvent> events,
                      const ClassMap& classes);
std::vector<DetectedEvent> read_detections(const std::filesystem::path& path, const ClassMap& classes);

}  // namespace polysed
