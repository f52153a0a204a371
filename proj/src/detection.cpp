#include "polysed/detection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "polysed/csv.hpp"

namespace polysed {

TargetRoll threshold_outputs(const Matrix& y, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw InvalidInput("threshold must lie in (0, 1)");
  TargetRoll roll;
  roll.values = (y.array() >= threshold).cast<std::uint8_t>().matrix();
  return roll;
}

std::vector<DetectedEvent> roll_to_events(const TargetRoll& roll, double frame_hop_s, double frame_len_s,
                                          const std::string& recording_id) {
  std::vector<DetectedEvent> events;
  const Eigen::Index n = roll.n_frames();
  for (Eigen::Index k = 0; k < roll.n_classes(); ++k) {
    Eigen::Index t = 0;
    while (t < n) {
      if (!roll.values(t, k)) {
        ++t;
        continue;
      }
      const Eigen::Index first = t;
      while (t < n && roll.values(t, k)) ++t;
      events.push_back({static_cast<std::size_t>(k), static_cast<double>(first) * frame_hop_s,
                        static_cast<double>(t - 1) * frame_hop_s + frame_len_s, recording_id});
    }
  }
  std::stable_sort(events.begin(), events.end(), [](const DetectedEvent& a, const DetectedEvent& b) {
    return a.onset_s != b.onset_s ? a.onset_s < b.onset_s : a.class_id < b.class_id;
  });
  return events;
}

TargetRoll events_to_roll(std::span<const DetectedEvent> events, std::size_t n_frames, double frame_hop_s,
                          double frame_len_s, std::size_t n_classes) {
  TargetRoll roll;
  roll.values = BinaryMatrix::Zero(static_cast<Eigen::Index>(n_frames), static_cast<Eigen::Index>(n_classes));
  // Tolerance absorbs the rounding in onset/offset arithmetic.
  const double tol = 1e-9 * frame_hop_s;
  for (const auto& ev : events) {
    if (ev.class_id >= n_classes) throw InvalidInput("detected class id out of range");
    const auto first = std::max<long long>(0, static_cast<long long>(std::ceil((ev.onset_s - tol) / frame_hop_s)));
    for (long long t = first; t < static_cast<long long>(n_frames); ++t) {
      const double start = static_cast<double>(t) * frame_hop_s;
      if (start + frame_len_s > ev.offset_s + tol) break;
      roll.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(ev.class_id)) = 1;
    }
  }
  return roll;
}

void write_detections(const std::filesystem::path& path, std::span<const DetectedEvent> events,
                      const ClassMap& classes) {
  std::vector<DetectedEvent> sorted(events.begin(), events.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const DetectedEvent& a, const DetectedEvent& b) {
    if (a.recording_id != b.recording_id) return a.recording_id < b.recording_id;
    return a.onset_s < b.onset_s;
  });
  std::ofstream os(path);
  if (!os) throw InvalidInput("cannot write " + path.string());
  os << "recording_id,class_name,onset_s,offset_s\n";
  for (const auto& ev : sorted) {
    os << ev.recording_id << ',' << classes.names.at(ev.class_id) << ',' << csv::format_double(ev.onset_s) << ','
       << csv::format_double(ev.offset_s) << '\n';
  }
  if (!os) throw InvalidInput("failed writing " + path.string());
}

std::vector<DetectedEvent> read_detections(const std::filesystem::path& path, const ClassMap& classes) {
  const auto table = csv::read(path, "recording_id,class_name,onset_s,offset_s");
  std::vector<DetectedEvent> events;
  for (const auto& r : table.rows) {
    events.push_back({classes.index_of(r[1]), csv::parse_double(r[2], "onset_s"), csv::parse_double(r[3], "offset_s"),
                      r[0]});
  }
  return events;
}

}  // namespace polysed
