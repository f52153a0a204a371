#pragma once

#include <filesystem>

#include "polysed/features.hpp"

namespace polysed {

/// Reads 16- or 24-bit PCM WAV. Stereo (or wider) input is averaged to mono.
/// The recording id defaults to the file stem.
AudioClip read_wav(const std::filesystem::path& path);

/// Writes a mono 16-bit PCM WAV. Samples are clipped to [-1, 1].
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

}  // namespace polysed
