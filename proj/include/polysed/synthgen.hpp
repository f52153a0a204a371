#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "polysed/features.hpp"
#include "polysed/sequence.hpp"

namespace polysed {

enum class SignalKind { tone, noise };

/// Sound of one synthetic event class.
struct EventClassDef {
  std::string name;
  SignalKind kind = SignalKind::tone;
  double low_hz = 0.0;
  double high_hz = 0.0;
  double min_duration_s = 1.0;
  double max_duration_s = 6.0;
  double min_amplitude = 0.1;
  double max_amplitude = 0.3;
};

struct SynthSpec {
  std::size_t n_contexts = 10;
  std::size_t n_classes = 6;
  std::size_t classes_per_context = 6;
  std::size_t recordings_per_context = 8;
  double recording_len_s = 30.0;
  /// Probability of polyphony levels 1, 2, ... (level 0 carries no mass).
  std::vector<double> polyphony{0.257, 0.295, 0.213, 0.125, 0.078, 0.027, 0.003};
  /// Empty: derived from n_classes by default_class_defs.
  std::vector<EventClassDef> classes;
  double min_segment_s = 0.5;
  double max_segment_s = 2.0;
  double background_level = 1e-3;
  double max_tv_distance = 0.1;
  std::uint64_t rng_seed = 1;
  double sample_rate = 44100.0;

  /// Throws InvalidInput on an infeasible spec.
  void validate() const;
  [[nodiscard]] std::vector<EventClassDef> class_defs() const;
};

/// One class per band, carriers spread evenly on the mel scale between
/// 300 Hz and 8 kHz; even classes are tones, odd ones band-limited noise.
std::vector<EventClassDef> default_class_defs(std::size_t n_classes);

struct SynthDataset {
  std::vector<AudioClip> clips;
  std::vector<AnnotationRecord> annotations;
  ClassMap classes;
  /// Folds assigned round-robin within each context.
  std::map<std::string, int> folds;
};

/// Recordings built from segments of constant polyphony drawn from the target
/// distribution; event onsets and offsets fall on segment boundaries.
SynthDataset generate_dataset(const SynthSpec& spec, int n_folds = 5);

struct PolyphonyStats {
  /// histogram[k] = fraction of frames with k active events.
  std::vector<double> histogram;
  double mean = 0.0;
};

/// Counts, per frame, events whose span covers the frame center.
PolyphonyStats measure_polyphony(std::span<const AnnotationRecord> annotations,
                                 const std::map<std::string, std::size_t>& frames_per_recording,
                                 double frame_hop_s, double frame_len_s);

/// Total-variation distance to a level-1-based target distribution.
double tv_distance(const PolyphonyStats& stats, std::span<const double> target_from_level1);

}  // namespace polysed
