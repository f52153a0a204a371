#pragma once

#include <filesystem>
#include <iosfwd>

#include "polysed/features.hpp"

namespace polysed {

/// POLYSED-FEAT v1: one text header line
///   `POLYSED-FEAT v1, n_frames, n_bands, frame_hop_s, context_id, recording_id`
/// followed by n_frames * n_bands little-endian float64 values, row-major.
///
/// The header carries no frame length; readers assume 50% overlap
/// (frame_len_s = 2 * frame_hop_s).
void write_features(std::ostream& os, const MelSpectrogram& spec);
MelSpectrogram read_features(std::istream& is);

void save_features(const std::filesystem::path& path, const MelSpectrogram& spec);
MelSpectrogram load_features(const std::filesystem::path& path);

/// Writes/reads raw little-endian float64 values.
void write_f64(std::ostream& os, const double* data, std::size_t n);
void read_f64(std::istream& is, double* data, std::size_t n);

}  // namespace polysed
