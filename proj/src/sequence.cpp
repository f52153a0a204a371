#include "polysed/sequence.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "polysed/csv.hpp"

namespace polysed {

TargetRoll annotations_to_roll(std::span<const EventAnnotation> events, std::size_t n_frames,
                               double frame_hop_s, double frame_len_s, std::size_t n_classes) {
  TargetRoll roll;
  roll.values = BinaryMatrix::Zero(static_cast<Eigen::Index>(n_frames), static_cast<Eigen::Index>(n_classes));
  for (const auto& ev : events) {
    if (ev.class_id >= n_classes) {
      throw InvalidInput("class id " + std::to_string(ev.class_id) + " out of range for " +
                         std::to_string(n_classes) + " classes");
    }
    if (!(ev.offset_s > ev.onset_s)) continue;
    // Candidate range, then exact interval test per frame.
    const auto first = static_cast<long long>(std::floor((ev.onset_s - frame_len_s) / frame_hop_s)) - 1;
    const auto last = static_cast<long long>(std::ceil(ev.offset_s / frame_hop_s)) + 1;
    for (long long t = std::max<long long>(first, 0); t <= last && t < static_cast<long long>(n_frames); ++t) {
      const double start = static_cast<double>(t) * frame_hop_s;
      const double end = start + frame_len_s;
      if (ev.onset_s < end && ev.offset_s > start) {
        roll.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(ev.class_id)) = 1;
      }
    }
  }
  return roll;
}

std::vector<TrainingSequence> split_multiscale(const LabeledSpectrogram& item,
                                               std::span<const std::size_t> lengths) {
  if (item.spec.n_frames() != item.roll.n_frames()) {
    throw InvalidInput("features and targets of '" + item.provenance.recording_id + "' are misaligned");
  }
  std::vector<TrainingSequence> out;
  const auto n = static_cast<std::size_t>(item.spec.n_frames());
  for (std::size_t len : lengths) {
    if (len == 0) throw InvalidInput("sequence length must be positive");
    for (std::size_t start = 0; start + len <= n; start += len) {
      TrainingSequence seq;
      const auto s = static_cast<Eigen::Index>(start);
      const auto l = static_cast<Eigen::Index>(len);
      seq.features = item.spec.values.middleRows(s, l);
      seq.targets = item.roll.values.middleRows(s, l);
      seq.provenance = item.provenance;
      seq.start_frame = start;
      seq.scale = len;
      out.push_back(std::move(seq));
    }
  }
  return out;
}

std::vector<SequenceBatch> make_minibatches(std::vector<TrainingSequence> sequences,
                                            std::size_t batch_size, std::uint64_t rng_seed) {
  if (batch_size == 0) throw InvalidInput("batch size must be positive");
  std::mt19937_64 rng(rng_seed);
  std::map<Eigen::Index, std::vector<TrainingSequence>> groups;
  for (auto& seq : sequences) groups[seq.length()].push_back(std::move(seq));

  std::vector<SequenceBatch> batches;
  for (auto& [length, group] : groups) {
    std::shuffle(group.begin(), group.end(), rng);
    for (std::size_t i = 0; i < group.size(); i += batch_size) {
      SequenceBatch batch;
      const std::size_t end = std::min(group.size(), i + batch_size);
      batch.sequences.assign(std::make_move_iterator(group.begin() + static_cast<std::ptrdiff_t>(i)),
                             std::make_move_iterator(group.begin() + static_cast<std::ptrdiff_t>(end)));
      batches.push_back(std::move(batch));
    }
  }
  std::shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

std::size_t ClassMap::index_of(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw InvalidInput("unknown class '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path) {
  const auto table = csv::read(path, "recording_id,context_id,onset_s,offset_s,class_name");
  std::vector<AnnotationRecord> rows;
  rows.reserve(table.rows.size());
  for (const auto& r : table.rows) {
    AnnotationRecord a{r[0], r[1], csv::parse_double(r[2], "onset_s"), csv::parse_double(r[3], "offset_s"), r[4]};
    if (!(a.onset_s >= 0.0 && a.onset_s < a.offset_s)) {
      throw InvalidInput(path.string() + ": event with onset " + r[2] + " and offset " + r[3] + " in '" + a.recording_id + "'");
    }
    rows.push_back(std::move(a));
  }
  return rows;
}

void write_annotations(const std::filesystem::path& path, std::span<const AnnotationRecord> rows) {
  std::ofstream os(path);
  if (!os) throw InvalidInput("cannot write " + path.string());
  os << "recording_id,context_id,onset_s,offset_s,class_name\n";
  for (const auto& a : rows) {
    os << a.recording_id << ',' << a.context_id << ',' << csv::format_double(a.onset_s) << ','
       << csv::format_double(a.offset_s) << ',' << a.class_name << '\n';
  }
  if (!os) throw InvalidInput("failed writing " + path.string());
}

ClassMap read_class_map(const std::filesystem::path& path) {
  const auto table = csv::read(path, "class_name,class_id");
  ClassMap map;
  map.names.resize(table.rows.size());
  std::vector<bool> seen(table.rows.size(), false);
  for (const auto& r : table.rows) {
    const auto id = csv::parse_int(r[1], "class_id");
    if (id < 0 || static_cast<std::size_t>(id) >= table.rows.size() || seen[static_cast<std::size_t>(id)]) {
      throw InvalidInput(path.string() + ": class ids must be a permutation of 0..n-1");
    }
    seen[static_cast<std::size_t>(id)] = true;
    map.names[static_cast<std::size_t>(id)] = r[0];
  }
  return map;
}

void write_class_map(const std::filesystem::path& path, const ClassMap& classes) {
  std::ofstream os(path);
  if (!os) throw InvalidInput("cannot write " + path.string());
  os << "class_name,class_id\n";
  for (std::size_t i = 0; i < classes.size(); ++i) os << classes.names[i] << ',' << i << '\n';
}

std::map<std::string, int> read_fold_assignment(const std::filesystem::path& path) {
  const auto table = csv::read(path, "recording_id,fold_id");
  std::map<std::string, int> folds;
  for (const auto& r : table.rows) {
    if (!folds.emplace(r[0], static_cast<int>(csv::parse_int(r[1], "fold_id"))).second) {
      throw InvalidInput(path.string() + ": recording '" + r[0] + "' assigned twice");
    }
  }
  return folds;
}

void write_fold_assignment(const std::filesystem::path& path, const std::map<std::string, int>& folds) {
  std::ofstream os(path);
  if (!os) throw InvalidInput("cannot write " + path.string());
  os << "recording_id,fold_id\n";
  for (const auto& [rec, fold] : folds) os << rec << ',' << fold << '\n';
}

std::vector<EventAnnotation> events_for_recording(std::span<const AnnotationRecord> rows,
                                                  const std::string& recording_id,
                                                  const ClassMap& classes) {
  std::vector<EventAnnotation> events;
  for (const auto& r : rows) {
    if (r.recording_id != recording_id) continue;
    events.push_back({r.onset_s, r.offset_s, classes.index_of(r.class_name), r.recording_id});
  }
  return events;
}

}  // namespace polysed
