#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "polysed/sequence.hpp"

namespace polysed {

struct AugmentationPlan {
  std::vector<double> stretch_factors{0.7, 0.85, 1.2, 1.5};
  std::vector<double> subframe_shifts{0.25, 0.5, 0.75};
  std::size_t mix_blocks_per_context = 20;
  /// Mixed material per context, as a multiple of the context's original frames.
  std::size_t mix_pair_count_per_context = 9;
  std::uint64_t rng_seed = 0;

  /// Throws InvalidInput when a field is out of range.
  void validate() const;
};

using SpecRollPair = std::pair<MelSpectrogram, TargetRoll>;

/// Resamples to round(n * factor) frames on an endpoint-preserving grid.
/// Targets copy the nearest source frame.
SpecRollPair time_stretch(const MelSpectrogram& spec, const TargetRoll& roll, double factor);

/// out[t] = (1 - shift) * in[t] + shift * in[t + 1]; one frame shorter.
SpecRollPair subframe_shift(const MelSpectrogram& spec, const TargetRoll& roll, double shift);

/// Mixmax: elementwise max of log spectra and OR of targets over the common length.
SpecRollPair block_mix(const MelSpectrogram& a, const TargetRoll& roll_a, const MelSpectrogram& b,
                       const TargetRoll& roll_b);

/// Stretched and shifted copies of every recording, plus mixed block pairs per
/// context. Originals are not part of the output.
std::vector<LabeledSpectrogram> augment_dataset(std::span<const LabeledSpectrogram> data,
                                                const AugmentationPlan& plan);

}  // namespace polysed
