#include "polysed/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <random>

#include "polysed/log.hpp"

namespace polysed {
namespace {

constexpr int kMaxAttempts = 20;
constexpr double kFadeS = 0.01;

struct OpenEvent {
  std::size_t class_id;
  double onset_s;
  double planned_end_s;
  double amplitude;
};

struct PlacedEvent {
  std::size_t class_id;
  double onset_s;
  double offset_s;
  double amplitude;
};

std::string two_digit(const char* prefix, std::size_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%02zu", prefix, v);
  return buf;
}

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t attempt, std::uint64_t context, std::uint64_t rec) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(attempt), static_cast<std::uint32_t>(context),
                    static_cast<std::uint32_t>(rec)};
  return std::mt19937_64(seq);
}

std::vector<PlacedEvent> place_events(const SynthSpec& spec, const std::vector<EventClassDef>& defs,
                                      const std::vector<std::size_t>& context_classes, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::discrete_distribution<std::size_t> level_dist(spec.polyphony.begin(), spec.polyphony.end());
  std::vector<OpenEvent> open;
  std::vector<PlacedEvent> placed;
  auto close = [&](std::size_t idx, double at) {
    placed.push_back({open[idx].class_id, open[idx].onset_s, at, open[idx].amplitude});
    open.erase(open.begin() + static_cast<std::ptrdiff_t>(idx));
  };

  double t = 0.0;
  while (t < spec.recording_len_s) {
    const double seg = spec.min_segment_s + (spec.max_segment_s - spec.min_segment_s) * unit(rng);
    const double end = std::min(t + seg, spec.recording_len_s);
    std::vector<std::size_t> just_closed;
    for (std::size_t k = open.size(); k-- > 0;) {
      if (open[k].planned_end_s <= t) {
        just_closed.push_back(open[k].class_id);
        close(k, t);
      }
    }
    const std::size_t level = std::min(level_dist(rng) + 1, context_classes.size());
    while (open.size() > level) {
      // Oldest event ends first.
      const auto oldest = std::min_element(open.begin(), open.end(), [](const OpenEvent& a, const OpenEvent& b) {
        return a.onset_s < b.onset_s;
      });
      just_closed.push_back(oldest->class_id);
      close(static_cast<std::size_t>(oldest - open.begin()), t);
    }
    while (open.size() < level) {
      std::vector<std::size_t> fresh, reused;
      for (auto c : context_classes) {
        const bool active = std::any_of(open.begin(), open.end(), [c](const OpenEvent& e) { return e.class_id == c; });
        if (active) continue;
        const bool closed_now = std::find(just_closed.begin(), just_closed.end(), c) != just_closed.end();
        (closed_now ? reused : fresh).push_back(c);
      }
      const auto& pool = fresh.empty() ? reused : fresh;
      const std::size_t cls = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
      const auto& def = defs[cls];
      const double dur = def.min_duration_s + (def.max_duration_s - def.min_duration_s) * unit(rng);
      const double amp = def.min_amplitude + (def.max_amplitude - def.min_amplitude) * unit(rng);
      open.push_back({cls, t, t + dur, amp});
    }
    t = end;
  }
  while (!open.empty()) close(open.size() - 1, spec.recording_len_s);
  std::sort(placed.begin(), placed.end(), [](const PlacedEvent& a, const PlacedEvent& b) {
    return a.onset_s != b.onset_s ? a.onset_s < b.onset_s : a.class_id < b.class_id;
  });
  return placed;
}

/// RBJ band-pass biquad (0 dB peak gain) applied to white noise.
std::vector<double> band_noise(std::size_t n, double low_hz, double high_hz, double sample_rate, std::mt19937_64& rng) {
  const double center = std::sqrt(low_hz * high_hz);
  const double q = center / (high_hz - low_hz);
  const double w0 = 2.0 * std::numbers::pi * center / sample_rate;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  const double b0 = alpha / a0, b2 = -alpha / a0;
  const double a1 = -2.0 * std::cos(w0) / a0, a2 = (1.0 - alpha) / a0;
  std::normal_distribution<double> white(0.0, 1.0);
  std::vector<double> out(n);
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  double energy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = white(rng);
    const double y = b0 * x + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x;
    y2 = y1;
    y1 = y;
    out[i] = y;
    energy += y * y;
  }
  // Same RMS as a unit sinusoid.
  const double rms = std::sqrt(energy / static_cast<double>(std::max<std::size_t>(n, 1)));
  if (rms > 0.0) {
    const double scale = std::sqrt(0.5) / rms;
    for (double& v : out) v *= scale;
  }
  return out;
}

void render_event(const PlacedEvent& ev, const EventClassDef& def, double sample_rate, std::mt19937_64& rng,
                  std::vector<double>& samples) {
  const auto first = static_cast<std::size_t>(std::llround(ev.onset_s * sample_rate));
  const auto last = std::min(samples.size(), static_cast<std::size_t>(std::llround(ev.offset_s * sample_rate)));
  if (last <= first) return;
  const std::size_t n = last - first;
  const auto fade = std::min(n / 2, static_cast<std::size_t>(kFadeS * sample_rate));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<double> body;
  if (def.kind == SignalKind::tone) {
    const double freq = def.low_hz + (def.high_hz - def.low_hz) * unit(rng);
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    const double step = 2.0 * std::numbers::pi * freq / sample_rate;
    body.resize(n);
    for (std::size_t i = 0; i < n; ++i) body[i] = std::sin(phase + step * static_cast<double>(i));
  } else {
    body = band_noise(n, def.low_hz, def.high_hz, sample_rate, rng);
  }
  for (std::size_t i = 0; i < n; ++i) {
    double env = 1.0;
    if (i < fade) env = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(i) / static_cast<double>(fade));
    if (n - 1 - i < fade) {
      env = std::min(env, 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(n - 1 - i) /
                                                 static_cast<double>(fade)));
    }
    samples[first + i] += ev.amplitude * env * body[i];
  }
}

std::vector<std::size_t> classes_of_context(const SynthSpec& spec, std::size_t context) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < spec.classes_per_context; ++j) out.push_back((context + j) % spec.n_classes);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<EventClassDef> default_class_defs(std::size_t n_classes) {
  std::vector<EventClassDef> defs;
  const double lo = hz_to_mel(300.0);
  const double hi = hz_to_mel(8000.0);
  const double spacing = n_classes > 1 ? (hi - lo) / static_cast<double>(n_classes - 1) : (hi - lo);
  for (std::size_t k = 0; k < n_classes; ++k) {
    const double center = n_classes > 1 ? lo + spacing * static_cast<double>(k) : 0.5 * (lo + hi);
    EventClassDef def;
    def.name = two_digit("class", k);
    def.kind = k % 2 == 0 ? SignalKind::tone : SignalKind::noise;
    def.low_hz = mel_to_hz(center - 0.25 * spacing);
    def.high_hz = mel_to_hz(center + 0.25 * spacing);
    def.min_duration_s = 1.0;
    def.max_duration_s = 8.0;
    def.min_amplitude = 0.05;
    def.max_amplitude = 0.3;
    defs.push_back(def);
  }
  return defs;
}

std::vector<EventClassDef> SynthSpec::class_defs() const {
  return classes.empty() ? default_class_defs(n_classes) : classes;
}

void SynthSpec::validate() const {
  if (n_contexts == 0 || recordings_per_context == 0) throw InvalidInput("synth: need at least one recording");
  if (n_classes == 0 || classes_per_context == 0 || classes_per_context > n_classes) {
    throw InvalidInput("synth: classes_per_context must lie in [1, n_classes]");
  }
  if (!(recording_len_s > 0.0) || !(sample_rate > 0.0)) throw InvalidInput("synth: lengths and rates must be positive");
  if (!(min_segment_s > 0.0) || max_segment_s < min_segment_s) throw InvalidInput("synth: invalid segment range");
  if (polyphony.empty()) throw InvalidInput("synth: empty polyphony distribution");
  double total = 0.0, unreachable = 0.0;
  for (std::size_t k = 0; k < polyphony.size(); ++k) {
    if (polyphony[k] < 0.0) throw InvalidInput("synth: negative polyphony probability");
    total += polyphony[k];
    if (k + 1 > classes_per_context) unreachable += polyphony[k];
  }
  // Published histograms are rounded; accept up to 1% slack and renormalize.
  if (std::abs(total - 1.0) > 1e-2) throw InvalidInput("synth: polyphony distribution must sum to 1");
  if (unreachable > max_tv_distance) {
    throw InvalidInput("synth: polyphony levels above classes_per_context carry too much mass");
  }
  const auto defs = class_defs();
  if (defs.size() != n_classes) throw InvalidInput("synth: class definitions do not match n_classes");
  for (const auto& d : defs) {
    if (!(d.min_duration_s > 0.0) || d.max_duration_s < d.min_duration_s) {
      throw InvalidInput("synth: invalid duration range for " + d.name);
    }
    if (d.min_duration_s > recording_len_s) {
      throw InvalidInput("synth: events of " + d.name + " are longer than a recording");
    }
    if (!(d.min_amplitude > 0.0) || d.max_amplitude < d.min_amplitude) {
      throw InvalidInput("synth: invalid amplitude range for " + d.name);
    }
    if (!(d.low_hz > 0.0) || d.high_hz <= d.low_hz || d.high_hz >= sample_rate / 2.0) {
      throw InvalidInput("synth: invalid frequency band for " + d.name);
    }
  }
}

SynthDataset generate_dataset(const SynthSpec& spec, int n_folds) {
  spec.validate();
  if (n_folds < 1) throw InvalidInput("synth: need at least one fold");
  const auto defs = spec.class_defs();

  const FrameSettings frames;
  const std::size_t frame_len = frame_length_samples(frames.frame_len_s, spec.sample_rate);
  const std::size_t hop = hop_length_samples(frame_len, frames.overlap);
  const double hop_s = static_cast<double>(hop) / spec.sample_rate;
  const double len_s = static_cast<double>(frame_len) / spec.sample_rate;
  const auto n_samples = static_cast<std::size_t>(std::llround(spec.recording_len_s * spec.sample_rate));

  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    SynthDataset ds;
    for (const auto& d : defs) ds.classes.names.push_back(d.name);
    std::vector<std::vector<PlacedEvent>> placements;
    std::map<std::string, std::size_t> frame_counts;

    for (std::size_t c = 0; c < spec.n_contexts; ++c) {
      const auto context_classes = classes_of_context(spec, c);
      const std::string context = two_digit("ctx", c);
      for (std::size_t r = 0; r < spec.recordings_per_context; ++r) {
        auto rng = derived_rng(spec.rng_seed, static_cast<std::uint64_t>(attempt), c, r);
        AudioClip clip;
        clip.sample_rate = spec.sample_rate;
        clip.context_id = context;
        clip.recording_id = context + two_digit("_rec", r);
        auto placed = place_events(spec, defs, context_classes, rng);
        for (const auto& ev : placed) {
          ds.annotations.push_back({clip.recording_id, context, ev.onset_s, ev.offset_s, defs[ev.class_id].name});
        }
        frame_counts[clip.recording_id] = frame_count(n_samples, frame_len, hop);
        ds.folds[clip.recording_id] = static_cast<int>((r + c) % static_cast<std::size_t>(n_folds));
        placements.push_back(std::move(placed));
        ds.clips.push_back(std::move(clip));
      }
    }

    const auto stats = measure_polyphony(ds.annotations, frame_counts, hop_s, len_s);
    const double tv = tv_distance(stats, spec.polyphony);
    if (tv > spec.max_tv_distance) {
      logger()->debug("synth attempt {}: polyphony TV distance {:.3f}, retrying", attempt, tv);
      continue;
    }

    // Audio is rendered only for an accepted placement.
    for (std::size_t k = 0; k < ds.clips.size(); ++k) {
      auto& clip = ds.clips[k];
      const std::size_t c = k / spec.recordings_per_context;
      const std::size_t r = k % spec.recordings_per_context;
      auto rng = derived_rng(spec.rng_seed ^ 0x9e3779b97f4a7c15ULL, static_cast<std::uint64_t>(attempt), c, r);
      std::normal_distribution<double> background(0.0, spec.background_level);
      clip.samples.resize(n_samples);
      for (double& s : clip.samples) s = background(rng);
      for (const auto& ev : placements[k]) render_event(ev, defs[ev.class_id], spec.sample_rate, rng, clip.samples);
    }
    return ds;
  }
  throw InvalidInput("synth: polyphony distribution not reached within " + std::to_string(kMaxAttempts) +
                     " attempts");
}

PolyphonyStats measure_polyphony(std::span<const AnnotationRecord> annotations,
                                 const std::map<std::string, std::size_t>& frames_per_recording,
                                 double frame_hop_s, double frame_len_s) {
  std::map<std::string, std::vector<int>> counts;
  for (const auto& [rec, n] : frames_per_recording) counts[rec].assign(n, 0);
  for (const auto& a : annotations) {
    auto it = counts.find(a.recording_id);
    if (it == counts.end()) continue;
    auto& c = it->second;
    for (std::size_t t = 0; t < c.size(); ++t) {
      const double center = static_cast<double>(t) * frame_hop_s + 0.5 * frame_len_s;
      if (center >= a.onset_s && center < a.offset_s) ++c[t];
    }
  }
  PolyphonyStats stats;
  std::size_t total = 0;
  for (const auto& [rec, c] : counts) {
    for (int level : c) {
      if (stats.histogram.size() <= static_cast<std::size_t>(level)) stats.histogram.resize(static_cast<std::size_t>(level) + 1, 0.0);
      stats.histogram[static_cast<std::size_t>(level)] += 1.0;
      stats.mean += level;
      ++total;
    }
  }
  if (total > 0) {
    for (double& h : stats.histogram) h /= static_cast<double>(total);
    stats.mean /= static_cast<double>(total);
  }
  return stats;
}

double tv_distance(const PolyphonyStats& stats, std::span<const double> target_from_level1) {
  const std::size_t n = std::max(stats.histogram.size(), target_from_level1.size() + 1);
  double mass = 0.0;
  for (double q : target_from_level1) mass += q;
  if (!(mass > 0.0)) throw InvalidInput("target distribution has no mass");
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double p = k < stats.histogram.size() ? stats.histogram[k] : 0.0;
    const double q = (k >= 1 && k - 1 < target_from_level1.size()) ? target_from_level1[k - 1] / mass : 0.0;
    sum += std::abs(p - q);
  }
  return 0.5 * sum;
}

}  // namespace polysed
