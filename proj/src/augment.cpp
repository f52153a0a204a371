#include "polysed/augment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>

#include "polysed/csv.hpp"
#include "polysed/log.hpp"

namespace polysed {
namespace {

void check_aligned(const MelSpectrogram& spec, const TargetRoll& roll) {
  if (spec.n_frames() != roll.n_frames()) throw InvalidInput("features and targets are misaligned");
}

std::string mix_tag(std::size_t a, std::size_t b) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_mix%03zu_%03zu", a, b);
  return buf;
}

}  // namespace

void AugmentationPlan::validate() const {
  for (double f : stretch_factors) {
    if (!(f > 0.0) || f == 1.0) throw InvalidInput("stretch factors must be positive and differ from 1");
  }
  for (double s : subframe_shifts) {
    if (!(s > 0.0 && s < 1.0)) throw InvalidInput("sub-frame shifts must lie in (0, 1)");
  }
  if (mix_pair_count_per_context > 0 && mix_blocks_per_context < 2) {
    throw InvalidInput("block mixing needs at least two blocks per context");
  }
}

SpecRollPair time_stretch(const MelSpectrogram& spec, const TargetRoll& roll, double factor) {
  check_aligned(spec, roll);
  if (!(factor > 0.0)) throw InvalidInput("stretch factor must be positive");
  const Eigen::Index n = spec.n_frames();
  if (n < 2) throw InvalidInput("time stretching needs at least two frames");
  const auto out_n = static_cast<Eigen::Index>(std::llround(static_cast<double>(n) * factor));
  if (out_n < 1) throw InvalidInput("stretched output would be empty");

  MelSpectrogram out = spec;
  out.values.resize(out_n, spec.n_bands());
  TargetRoll out_roll;
  out_roll.values.resize(out_n, roll.n_classes());
  const double step = out_n > 1 ? static_cast<double>(n - 1) / static_cast<double>(out_n - 1) : 0.0;
  for (Eigen::Index t = 0; t < out_n; ++t) {
    const double pos = static_cast<double>(t) * step;
    const auto lo = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(pos)), n - 1);
    const Eigen::Index hi = std::min<Eigen::Index>(lo + 1, n - 1);
    const double frac = pos - static_cast<double>(lo);
    if (frac == 0.0) {
      out.values.row(t) = spec.values.row(lo);
    } else {
      out.values.row(t) = (1.0 - frac) * spec.values.row(lo) + frac * spec.values.row(hi);
    }
    const auto nearest = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::llround(pos)), n - 1);
    out_roll.values.row(t) = roll.values.row(nearest);
  }
  return {std::move(out), std::move(out_roll)};
}

SpecRollPair subframe_shift(const MelSpectrogram& spec, const TargetRoll& roll, double shift) {
  check_aligned(spec, roll);
  if (!(shift > 0.0 && shift < 1.0)) throw InvalidInput("sub-frame shift must lie in (0, 1)");
  const Eigen::Index n = spec.n_frames();
  if (n < 2) throw InvalidInput("sub-frame shifting needs at least two frames");

  MelSpectrogram out = spec;
  out.values = (1.0 - shift) * spec.values.topRows(n - 1) + shift * spec.values.bottomRows(n - 1);
  TargetRoll out_roll;
  out_roll.values.resize(n - 1, roll.n_classes());
  for (Eigen::Index t = 0; t + 1 < n; ++t) {
    const auto src = static_cast<Eigen::Index>(std::llround(static_cast<double>(t) + shift));
    out_roll.values.row(t) = roll.values.row(src);
  }
  return {std::move(out), std::move(out_roll)};
}

SpecRollPair block_mix(const MelSpectrogram& a, const TargetRoll& roll_a, const MelSpectrogram& b,
                       const TargetRoll& roll_b) {
  check_aligned(a, roll_a);
  check_aligned(b, roll_b);
  if (a.n_bands() != b.n_bands()) throw InvalidInput("cannot mix spectrograms with different band counts");
  if (roll_a.n_classes() != roll_b.n_classes()) throw InvalidInput("cannot mix rolls with different class counts");
  const Eigen::Index n = std::min(a.n_frames(), b.n_frames());
  MelSpectrogram out = a;
  out.values = a.values.topRows(n).cwiseMax(b.values.topRows(n));
  TargetRoll out_roll;
  out_roll.values = roll_a.values.topRows(n).cwiseMax(roll_b.values.topRows(n));
  return {std::move(out), std::move(out_roll)};
}

std::vector<LabeledSpectrogram> augment_dataset(std::span<const LabeledSpectrogram> data,
                                                const AugmentationPlan& plan) {
  plan.validate();
  std::vector<LabeledSpectrogram> out;

  for (const auto& item : data) {
    for (double factor : plan.stretch_factors) {
      auto [spec, roll] = time_stretch(item.spec, item.roll, factor);
      LabeledSpectrogram aug{std::move(spec), std::move(roll), item.provenance};
      aug.provenance.recording_id += "_stretch" + csv::format_double(factor);
      aug.provenance.augmented = true;
      aug.spec.recording_id = aug.provenance.recording_id;
      out.push_back(std::move(aug));
    }
    for (double shift : plan.subframe_shifts) {
      auto [spec, roll] = subframe_shift(item.spec, item.roll, shift);
      LabeledSpectrogram aug{std::move(spec), std::move(roll), item.provenance};
      aug.provenance.recording_id += "_shift" + csv::format_double(shift);
      aug.provenance.augmented = true;
      aug.spec.recording_id = aug.provenance.recording_id;
      out.push_back(std::move(aug));
    }
  }

  if (plan.mix_pair_count_per_context == 0) return out;

  // Contexts in order of first appearance.
  std::vector<std::string> context_order;
  std::map<std::string, std::vector<const LabeledSpectrogram*>> by_context;
  for (const auto& item : data) {
    auto& group = by_context[item.provenance.context_id];
    if (group.empty()) context_order.push_back(item.provenance.context_id);
    group.push_back(&item);
  }

  std::mt19937_64 rng(plan.rng_seed);
  for (const auto& context : context_order) {
    const auto& group = by_context[context];
    Eigen::Index total = 0;
    for (const auto* item : group) total += item->spec.n_frames();

    MelSpectrogram joined = group.front()->spec;
    joined.values.resize(total, group.front()->spec.n_bands());
    TargetRoll joined_roll;
    joined_roll.values.resize(total, group.front()->roll.n_classes());
    std::vector<std::string> sources;
    Eigen::Index row = 0;
    for (const auto* item : group) {
      if (item->spec.n_bands() != joined.n_bands()) throw InvalidInput("band count differs within context " + context);
      joined.values.middleRows(row, item->spec.n_frames()) = item->spec.values;
      joined_roll.values.middleRows(row, item->roll.n_frames()) = item->roll.values;
      row += item->spec.n_frames();
      sources.insert(sources.end(), item->provenance.sources.begin(), item->provenance.sources.end());
    }

    std::size_t n_blocks = plan.mix_blocks_per_context;
    if (static_cast<std::size_t>(total) < n_blocks) {
      logger()->warn("context '{}' has {} frames; reducing mix blocks from {} to {}", context, total, n_blocks,
                     static_cast<std::size_t>(total));
      n_blocks = static_cast<std::size_t>(total);
    }
    if (n_blocks < 2) {
      logger()->warn("context '{}' is too short for block mixing; skipped", context);
      continue;
    }
    const Eigen::Index block_len = total / static_cast<Eigen::Index>(n_blocks);

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < n_blocks; ++i) {
      for (std::size_t j = i + 1; j < n_blocks; ++j) pairs.emplace_back(i, j);
    }
    std::shuffle(pairs.begin(), pairs.end(), rng);
    const auto budget = static_cast<Eigen::Index>(plan.mix_pair_count_per_context) * total;
    auto needed = static_cast<std::size_t>((budget + block_len - 1) / block_len);
    if (needed > pairs.size()) {
      logger()->warn("context '{}': only {} block pairs available, {} requested", context, pairs.size(), needed);
      needed = pairs.size();
    }
    pairs.resize(needed);

    for (const auto& [i, j] : pairs) {
      auto block = [&](std::size_t k) {
        MelSpectrogram s = joined;
        s.values = joined.values.middleRows(static_cast<Eigen::Index>(k) * block_len, block_len);
        TargetRoll r;
        r.values = joined_roll.values.middleRows(static_cast<Eigen::Index>(k) * block_len, block_len);
        return std::make_pair(std::move(s), std::move(r));
      };
      const auto [sa, ra] = block(i);
      const auto [sb, rb] = block(j);
      auto [spec, roll] = block_mix(sa, ra, sb, rb);
      LabeledSpectrogram aug;
      aug.provenance.recording_id = context + mix_tag(i, j);
      aug.provenance.context_id = context;
      aug.provenance.sources = sources;
      aug.provenance.augmented = true;
      spec.recording_id = aug.provenance.recording_id;
      spec.context_id = context;
      aug.spec = std::move(spec);
      aug.roll = std::move(roll);
      out.push_back(std::move(aug));
    }
  }
  return out;
}

}  // namespace polysed
