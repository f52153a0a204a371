#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "polysed/types.hpp"

namespace polysed {

struct AudioClip {
  std::vector<double> samples;
  double sample_rate = 44100.0;
  std::string context_id;
  std::string recording_id;
};

/// Log-mel energies, one row per frame.
struct MelSpectrogram {
  Matrix values;
  double frame_hop_s = 0.025;
  double frame_len_s = 0.050;
  std::string context_id;
  std::string recording_id;

  [[nodiscard]] Eigen::Index n_frames() const { return values.rows(); }
  [[nodiscard]] Eigen::Index n_bands() const { return values.cols(); }
};

/// Per-band affine normalization fitted on training material.
struct BandNormalizer {
  Vector means;
  Vector std_devs;

  [[nodiscard]] Eigen::Index n_bands() const { return means.size(); }
};

/// Triangular filters on the mel scale.
///
/// `band_edges_hz` holds n_bands + 2 frequencies: the lower edge of the first
/// filter, the n_bands centers, then the upper edge of the last filter.
struct MelFilterbank {
  Matrix weights;  // n_bands x (n_fft / 2 + 1)
  std::vector<double> band_edges_hz;
  double sample_rate = 0.0;
  std::size_t n_fft = 0;

  [[nodiscard]] Eigen::Index n_bands() const { return weights.rows(); }
  [[nodiscard]] double center_hz(Eigen::Index band) const {
    return band_edges_hz[static_cast<std::size_t>(band) + 1];
  }
};

struct FrameSettings {
  double frame_len_s = 0.050;
  double overlap = 0.5;
  std::size_t n_bands = 40;
};

/// Floor applied to filterbank energies before the logarithm.
inline constexpr double kLogFloor = 1e-10;

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Scale so the largest absolute sample is exactly 1. All-zero clips pass through.
AudioClip normalize_amplitude(AudioClip clip);

MelFilterbank build_mel_filterbank(double sample_rate, std::size_t n_fft, std::size_t n_bands);

/// Frame length in samples for a duration at a sample rate.
std::size_t frame_length_samples(double frame_len_s, double sample_rate);
/// Hop in samples: floor(frame_len * (1 - overlap)), at least one.
std::size_t hop_length_samples(std::size_t frame_len, double overlap);
/// floor((n_samples - frame_len) / hop) + 1, or 0 when the clip is shorter than a frame.
std::size_t frame_count(std::size_t n_samples, std::size_t frame_len, std::size_t hop);
/// Smallest power of two >= n.
std::size_t next_pow2(std::size_t n);

/// Hamming-windowed magnitude spectra projected through `fb`, then log with floor.
/// The FFT size is taken from the filterbank.
MelSpectrogram extract_log_mel(const AudioClip& clip, const MelFilterbank& fb,
                               double frame_len_s, double overlap);

/// Amplitude normalization, filterbank sized for the frame and extraction in one call.
MelSpectrogram extract_features(const AudioClip& clip, const FrameSettings& settings);

BandNormalizer fit_normalizer(std::span<const MelSpectrogram> training_specs);
MelSpectrogram apply_normalizer(const MelSpectrogram& spec, const BandNormalizer& norm);

}  // namespace polysed
