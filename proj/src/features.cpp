#include "polysed/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "polysed/log.hpp"

namespace polysed {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

AudioClip normalize_amplitude(AudioClip clip) {
  double peak = 0.0;
  for (double s : clip.samples) peak = std::max(peak, std::abs(s));
  if (peak == 0.0) return clip;
  for (double& s : clip.samples) s /= peak;
  return clip;
}

MelFilterbank build_mel_filterbank(double sample_rate, std::size_t n_fft, std::size_t n_bands) {
  if (sample_rate <= 0.0) throw InvalidInput("sample rate must be positive");
  if (n_fft < 2 || (n_fft & (n_fft - 1)) != 0) throw InvalidInput("n_fft must be a power of two");
  if (n_bands < 1) throw InvalidInput("n_bands must be at least 1");

  const double nyquist = sample_rate / 2.0;
  const double mel_max = hz_to_mel(nyquist);
  const std::size_t n_points = n_bands + 2;
  const std::size_t n_bins = n_fft / 2 + 1;
  const double bin_hz = sample_rate / static_cast<double>(n_fft);

  MelFilterbank fb;
  fb.sample_rate = sample_rate;
  fb.n_fft = n_fft;
  fb.band_edges_hz.resize(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    const double mel = mel_max * static_cast<double>(i) / static_cast<double>(n_points - 1);
    fb.band_edges_hz[i] = mel_to_hz(mel);
  }
  fb.band_edges_hz.front() = 0.0;
  fb.band_edges_hz.back() = nyquist;

  // Adjacent centers must land on distinct FFT bins.
  long prev_bin = -1;
  for (std::size_t b = 0; b < n_bands; ++b) {
    const long center_bin = std::lround(fb.band_edges_hz[b + 1] / bin_hz);
    if (center_bin <= prev_bin) {
      throw InvalidInput("too many mel bands for n_fft=" + std::to_string(n_fft) +
                         ": centers collapse onto FFT bin " + std::to_string(center_bin));
    }
    prev_bin = center_bin;
  }

  fb.weights = Matrix::Zero(static_cast<Eigen::Index>(n_bands), static_cast<Eigen::Index>(n_bins));
  for (std::size_t b = 0; b < n_bands; ++b) {
    const double lo = fb.band_edges_hz[b];
    const double mid = fb.band_edges_hz[b + 1];
    const double hi = fb.band_edges_hz[b + 2];
    bool any = false;
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      double w = 0.0;
      if (f > lo && f <= mid) {
        w = (f - lo) / (mid - lo);
      } else if (f > mid && f < hi) {
        w = (hi - f) / (hi - mid);
      }
      if (w > 0.0) {
        fb.weights(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k)) = w;
        any = true;
      }
    }
    if (!any) {
      throw InvalidInput("mel band " + std::to_string(b) + " contains no FFT bin");
    }
  }
  return fb;
}

std::size_t frame_length_samples(double frame_len_s, double sample_rate) {
  return static_cast<std::size_t>(std::llround(frame_len_s * sample_rate));
}

std::size_t hop_length_samples(std::size_t frame_len, double overlap) {
  const auto hop = static_cast<std::size_t>(std::floor(static_cast<double>(frame_len) * (1.0 - overlap)));
  return std::max<std::size_t>(hop, 1);
}

std::size_t frame_count(std::size_t n_samples, std::size_t frame_len, std::size_t hop) {
  if (n_samples < frame_len || frame_len == 0) return 0;
  return (n_samples - frame_len) / hop + 1;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

MelSpectrogram extract_log_mel(const AudioClip& clip, const MelFilterbank& fb,
                               double frame_len_s, double overlap) {
  if (!(overlap >= 0.0 && overlap < 1.0)) throw InvalidInput("overlap must lie in [0, 1)");
  if (clip.sample_rate != fb.sample_rate) {
    throw InvalidInput("clip sample rate does not match the filterbank");
  }
  const std::size_t frame_len = frame_length_samples(frame_len_s, clip.sample_rate);
  const std::size_t hop = hop_length_samples(frame_len, overlap);
  const std::size_t n_frames = frame_count(clip.samples.size(), frame_len, hop);
  if (n_frames == 0) {
    throw InvalidInput("recording '" + clip.recording_id + "' is shorter than one frame");
  }
  const std::size_t n_fft = fb.n_fft;
  if (n_fft < frame_len) throw InvalidInput("filterbank FFT size is shorter than the frame");
  const std::size_t n_bins = n_fft / 2 + 1;

  std::vector<double> window(frame_len);
  for (std::size_t n = 0; n < frame_len; ++n) {
    window[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                       static_cast<double>(frame_len - 1));
  }

  MelSpectrogram out;
  out.frame_hop_s = static_cast<double>(hop) / clip.sample_rate;
  out.frame_len_s = static_cast<double>(frame_len) / clip.sample_rate;
  out.context_id = clip.context_id;
  out.recording_id = clip.recording_id;
  out.values.resize(static_cast<Eigen::Index>(n_frames), fb.n_bands());

  Eigen::FFT<double> fft;
  std::vector<double> buffer(n_fft, 0.0);
  std::vector<std::complex<double>> spectrum;
  Vector magnitude(static_cast<Eigen::Index>(n_bins));
  for (std::size_t t = 0; t < n_frames; ++t) {
    const std::size_t start = t * hop;
    for (std::size_t n = 0; n < frame_len; ++n) buffer[n] = clip.samples[start + n] * window[n];
    fft.fwd(spectrum, buffer);
    for (std::size_t k = 0; k < n_bins; ++k) magnitude(static_cast<Eigen::Index>(k)) = std::abs(spectrum[k]);
    const Vector mel = fb.weights * magnitude;
    for (Eigen::Index b = 0; b < mel.size(); ++b) {
      out.values(static_cast<Eigen::Index>(t), b) = std::log(std::max(mel(b), kLogFloor));
    }
  }
  return out;
}

MelSpectrogram extract_features(const AudioClip& clip, const FrameSettings& settings) {
  const std::size_t frame_len = frame_length_samples(settings.frame_len_s, clip.sample_rate);
  const auto fb = build_mel_filterbank(clip.sample_rate, next_pow2(frame_len), settings.n_bands);
  return extract_log_mel(normalize_amplitude(clip), fb, settings.frame_len_s, settings.overlap);
}

BandNormalizer fit_normalizer(std::span<const MelSpectrogram> training_specs) {
  if (training_specs.empty()) throw InvalidInput("no spectrograms to fit the normalizer on");
  const Eigen::Index n_bands = training_specs.front().n_bands();
  Vector sum = Vector::Zero(n_bands);
  Eigen::Index n = 0;
  for (const auto& spec : training_specs) {
    if (spec.n_bands() != n_bands) throw InvalidInput("band count differs across spectrograms");
    sum += spec.values.colwise().sum().transpose();
    n += spec.n_frames();
  }
  if (n < 2) throw InvalidInput("need at least two frames to fit the normalizer");

  BandNormalizer norm;
  norm.means = sum / static_cast<double>(n);
  Vector sq = Vector::Zero(n_bands);
  for (const auto& spec : training_specs) {
    sq += (spec.values.rowwise() - norm.means.transpose()).array().square().matrix().colwise().sum().transpose();
  }
  norm.std_devs = (sq / static_cast<double>(n)).array().sqrt().matrix();
  for (Eigen::Index b = 0; b < n_bands; ++b) {
    if (!(norm.std_devs(b) > 0.0)) {
      logger()->warn("band {} has zero variance on the training pool; using std 1", b);
      norm.std_devs(b) = 1.0;
    }
  }
  return norm;
}

MelSpectrogram apply_normalizer(const MelSpectrogram& spec, const BandNormalizer& norm) {
  if (spec.n_bands() != norm.n_bands() || norm.std_devs.size() != norm.means.size()) {
    throw InvalidInput("normalizer has " + std::to_string(norm.n_bands()) + " bands, spectrogram has " +
                       std::to_string(spec.n_bands()));
  }
  MelSpectrogram out = spec;
  out.values = ((spec.values.rowwise() - norm.means.transpose()).array().rowwise() /
                norm.std_devs.transpose().array())
                   .matrix();
  return out;
}

}  // namespace polysed
